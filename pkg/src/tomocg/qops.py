"""Dense Hermitian-operator kernel.

Operators are plain ``numpy`` complex arrays of shape ``(D, D)``. The
constructors below (``hermitian``, ``density_matrix``, ``povm_element``)
symmetrize and validate their input and return fresh read-only arrays, so
results can be shared freely between tasks.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

INPUT_TOL = 1e-8
INVARIANT_TOL = 1e-10

_SIGMA_YY = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
)


class ValidationError(ValueError):
    """Raised when an operator violates the Hermitian/state/effect invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def hermitian(entries, tol: float = INPUT_TOL) -> np.ndarray:
    """Return ``(H + H^dagger)/2`` after checking the anti-Hermitian part is below ``tol``."""
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("operator has non-finite entries")
    skew = np.max(np.abs(a - a.conj().T)) / 2
    if skew > tol:
        raise ValidationError(f"anti-Hermitian part {skew:.3e} exceeds {tol:.1e}")
    return _frozen((a + a.conj().T) / 2)


def density_matrix(entries, tol: float = INVARIANT_TOL) -> np.ndarray:
    h = hermitian(entries)
    tr = np.trace(h).real
    if abs(tr - 1) > tol:
        raise ValidationError(f"trace {tr!r} differs from 1 by more than {tol:.1e}")
    lo = np.linalg.eigvalsh(h)[0]
    if lo < -tol:
        raise ValidationError(f"smallest eigenvalue {lo:.3e} is negative")
    return h


def povm_element(entries, tol: float = INVARIANT_TOL) -> np.ndarray:
    h = hermitian(entries)
    ev = np.linalg.eigvalsh(h)
    if ev[0] < -tol or ev[-1] > 1 + tol:
        raise ValidationError(f"effect spectrum [{ev[0]:.3e}, {ev[-1]:.3e}] outside [0, 1]")
    return h


def eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian operator."""
    h = hermitian(h)
    w, v = np.linalg.eigh(h)
    return w, v


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ValidationError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b``."""
    _check_pair(a, b)
    diff = np.asarray(a) - np.asarray(b)
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit state.

    Uses the spin-flipped state ``(sy x sy) rho* (sy x sy)``; the square roots
    of the eigenvalues of ``rho @ flipped`` are sorted in decreasing order.
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValidationError(f"concurrence needs a 4x4 state, got {rho.shape}")
    flipped = _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    ev = np.linalg.eigvals(rho @ flipped).real
    s = np.sort(np.sqrt(np.clip(ev, 0, None)))[::-1]
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def admix(rho: np.ndarray, gamma: float) -> np.ndarray:
    """Mix ``rho`` with the maximally mixed state: ``(1 - gamma) rho + gamma I / D``."""
    if not 0 <= gamma <= 1:
        raise ValidationError(f"admixture {gamma!r} outside [0, 1]")
    rho = np.asarray(rho)
    d = rho.shape[0]
    return _frozen((1 - gamma) * rho + gamma / d * np.eye(d))


def psd_project(h: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to zero (nearest PSD operator in Frobenius norm)."""
    w, v = eigh(h)
    if w[0] >= 0:
        return hermitian(h)
    w = np.clip(w, 0, None)
    out = (v * w) @ v.conj().T
    return _frozen((out + out.conj().T) / 2)


def maximally_mixed(d: int) -> np.ndarray:
    return _frozen(np.eye(d, dtype=complex) / d)


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return _frozen(np.outer(psi, psi.conj()))


def sqrt_inv(h: np.ndarray, cond_max: float = 1e12) -> np.ndarray:
    """``h^(-1/2)`` of a positive definite operator; raises if ``cond(h) > cond_max``."""
    w, v = np.linalg.eigh(h)
    if w[0] <= 0 or w[-1] / w[0] > cond_max:
        raise np.linalg.LinAlgError(
            f"operator is numerically singular (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})"
        )
    return (v / np.sqrt(w)) @ v.conj().T


# --- text serialization -------------------------------------------------------


def format_operator(h: np.ndarray) -> str:
    h = np.asarray(h, dtype=complex)
    lines = [str(h.shape[0])]
    for row in h:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(lines) + "\n"


def parse_operator(text: str) -> np.ndarray:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    try:
        d = int(rows[0][0])
    except (IndexError, ValueError) as exc:
        raise ValidationError("operator text must start with its dimension") from exc
    body = rows[1:]
    if len(body) != d or any(len(r) != d for r in body):
        raise ValidationError(f"expected {d} rows of {d} entries")
    out = np.empty((d, d), dtype=complex)
    for i, row in enumerate(body):
        for j, tok in enumerate(row):
            re, im = tok.split(",")
            out[i, j] = complex(float(re), float(im))
    return hermitian(out)


def write_operator(path, h: np.ndarray) -> None:
    Path(path).write_text(format_operator(h))


def read_operator(path) -> np.ndarray:
    return parse_operator(Path(path).read_text())
