"""Seeded random ensembles and the noisy-measurement construction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qops

# purpose tags for SeedSpec streams
POM, STATE, NOISE, COUNTS = 0, 1, 2, 3


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a tuple of stream indices.

    Each distinct index tuple gives an independent generator, regardless of
    the order in which generators are created.
    """

    master_seed: int
    streams: tuple[int, ...] = ()

    def child(self, *indices: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.streams + tuple(indices))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed & 0xFFFFFFFFFFFFFFFF, spawn_key=self.streams)
        return np.random.Generator(np.random.PCG64(ss))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng()
    return np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _check_dim(d: int) -> None:
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")


def haar_pure_state(d: int, seed) -> np.ndarray:
    _check_dim(d)
    psi = _ginibre(_as_rng(seed), d)
    return qops.ket_to_dm(psi)


def hs_random_state(d: int, seed) -> np.ndarray:
    """Hilbert-Schmidt distributed density matrix from a square Ginibre matrix."""
    _check_dim(d)
    g = _ginibre(_as_rng(seed), (d, d))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return qops.hermitian(rho)


def random_rank1_pom(d: int, m: int, seed, max_redraws: int = 100) -> list[np.ndarray]:
    """``m`` rank-one effects summing to the identity.

    Haar-random projectors ``|phi><phi|`` are conjugated by ``S^(-1/2)`` with
    ``S`` their sum. A draw whose ``S`` has condition number above 1e12, or whose
    effects do not span the operator space, is redrawn.
    """
    _check_dim(d)
    if m < d * d:
        raise ValueError(f"an informationally complete POM needs m >= d^2 = {d * d}, got {m}")
    rng = _as_rng(seed)
    for _ in range(max_redraws):
        phi = _ginibre(rng, (m, d))
        phi /= np.linalg.norm(phi, axis=1, keepdims=True)
        s = phi.T @ phi.conj()  # sum_l |phi_l><phi_l|
        try:
            s_half = qops.sqrt_inv(s)
        except np.linalg.LinAlgError:
            continue
        kets = phi @ s_half.T  # rows are S^(-1/2)|phi_l>
        pom = [qops.hermitian(np.outer(k, k.conj())) for k in kets]
        if gram_rank(pom) == d * d:
            return pom
    raise RuntimeError(f"no well-conditioned POM after {max_redraws} redraws")


def gram_rank(effects, threshold: float = 1e-8) -> int:
    """Rank of the matrix of vectorized effects (operator-space span dimension)."""
    vecs = np.array([np.asarray(e).ravel() for e in effects])
    sv = np.linalg.svd(vecs, compute_uv=False)
    return int(np.sum(sv > threshold * max(sv[0], 1.0)))


@dataclass(frozen=True)
class MeasurementSetup:
    """Well-calibrated, intended and actual (noisy) outcomes of one experiment."""

    dim: int
    well: tuple[np.ndarray, ...]
    intended: tuple[np.ndarray, ...]
    actual_ill: tuple[np.ndarray, ...]
    scale: float
    mu: float
    noise_states: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def m_well(self) -> int:
        return len(self.well)

    @property
    def m_ill(self) -> int:
        return len(self.intended)

    @property
    def m_total(self) -> int:
        return self.m_well + self.m_ill

    def actual_outcomes(self) -> list[np.ndarray]:
        return [*self.well, *self.actual_ill]

    def assumed_outcomes(self) -> list[np.ndarray]:
        return [*self.well, *self.intended]

    def validate(self, tol: float = qops.INVARIANT_TOL) -> None:
        if len(self.intended) != len(self.actual_ill):
            raise qops.ValidationError("intended and actual ill-calibrated sets differ in size")
        for name, ops in (("actual", self.actual_outcomes()), ("intended", self.assumed_outcomes())):
            for e in ops:
                qops.povm_element(e, tol)
            top = np.linalg.eigvalsh(sum(ops))[-1]
            if top > 1 + tol:
                raise qops.ValidationError(f"{name} outcomes sum exceeds identity (top eigenvalue {top!r})")


def perturb_pom(clean, m_well: int, mu: float, seed) -> MeasurementSetup:
    """Build a setup whose last ``M - m_well`` outcomes are noisy versions of ``clean``.

    Each ill-calibrated outcome becomes ``(1 - mu) P_k + mu rho_k`` with a fresh
    Hilbert-Schmidt ``rho_k``; everything is then scaled by ``1/lambda_max`` of the
    total so the actual outcomes form a valid (sub-normalized) measurement.
    """
    if not 0 <= mu <= 1:
        raise ValueError(f"noise level {mu!r} outside [0, 1]")
    clean = [np.asarray(e) for e in clean]
    m = len(clean)
    if not 0 <= m_well <= m:
        raise ValueError(f"m_well must be in [0, {m}], got {m_well}")
    d = clean[0].shape[0]
    rng = _as_rng(seed)
    noise = tuple(hs_random_state(d, rng) for _ in range(m - m_well))
    perturbed = [(1 - mu) * clean[m_well + k] + mu * noise[k] for k in range(m - m_well)]
    total = sum(clean[:m_well], np.zeros((d, d), complex)) + sum(perturbed, np.zeros((d, d), complex))
    scale = 1.0 / np.linalg.eigvalsh((total + total.conj().T) / 2)[-1]
    return MeasurementSetup(
        dim=d,
        well=tuple(qops.hermitian(scale * e) for e in clean[:m_well]),
        intended=tuple(qops.hermitian(scale * e) for e in clean[m_well:]),
        actual_ill=tuple(qops.hermitian(scale * a) for a in perturbed),
        scale=float(scale),
        mu=float(mu),
        noise_states=noise,
    )
