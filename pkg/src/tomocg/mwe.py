"""Maximum-weighted-entropy re-estimation of ill-calibrated counts.

Given raw counts ``n_k`` on the noisy outcomes, the weights are
``w_k = (n_k / N_ill)**t`` and the re-estimated frequencies maximize
``-sum_k w_k nu_k log nu_k`` on the simplex. Stationarity gives
``nu_k = exp(-1 - lam / w_k)`` with ``lam`` fixed by ``sum nu = 1``; the sum is
strictly decreasing in ``lam``, so the multiplier is found by a bracketed
bisection followed by a few Newton steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import Counts

ROOT_TOL = 1e-12
NEWTON_STEPS = 5


@dataclass(frozen=True)
class MweSolution:
    nu: np.ndarray
    lam: float
    n_mwe: np.ndarray
    t: float
    weights: np.ndarray
    # log(nu) in closed form; stays finite where nu itself underflows to 0
    log_nu: np.ndarray

    def stationarity_residual(self) -> float:
        pos = self.weights > 0
        if not pos.any():
            return 0.0
        w = self.weights[pos]
        return float(np.max(np.abs(w * (self.log_nu[pos] + 1) + self.lam)))


def weighted_entropy(weights, nu_prime) -> float:
    """``-sum w_k nu_k log nu_k`` over positive weights, with ``0 log 0 = 0``."""
    w = np.asarray(weights, dtype=float)
    nu = np.asarray(nu_prime, dtype=float)
    if w.shape != nu.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {nu.shape}")
    if np.any(w < 0) or np.any(nu < 0):
        raise ValueError("weights and frequencies must be non-negative")
    mask = (w > 0) & (nu > 0)
    return float(-np.sum(w[mask] * nu[mask] * np.log(nu[mask])))


def _nu_of(lam: float, w: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(-1.0 - lam / w)


def _g(lam: float, w: np.ndarray) -> float:
    return float(np.sum(_nu_of(lam, w))) - 1.0


def solve_multiplier(w: np.ndarray) -> float:
    """Root of ``sum_k exp(-1 - lam/w_k) = 1`` for strictly positive weights."""
    w = np.asarray(w, dtype=float)
    limit = 1e6 * w.max()
    if _g(0.0, w) > 0:
        lo, hi = 0.0, 1.0
        while _g(hi, w) > 0:
            lo, hi = hi, 2 * hi
            if hi > limit:
                raise ArithmeticError("could not bracket the Lagrange multiplier")
    else:
        lo, hi = -1.0, 0.0
        while _g(lo, w) < 0:
            lo, hi = 2 * lo, lo
            if -lo > limit:
                raise ArithmeticError("could not bracket the Lagrange multiplier")
    # g is decreasing: g(lo) >= 0 >= g(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = _g(mid, w)
        if abs(gm) < ROOT_TOL or mid in (lo, hi):
            break
        if gm > 0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        nu = _nu_of(lam, w)
        g = nu.sum() - 1.0
        dg = -np.sum(nu / w)
        if g == 0 or dg == 0:
            break
        step = lam - g / dg
        if not lo <= step <= hi:
            break
        lam = step
    return float(lam)


def mwe_frequencies(ill_counts, t: float = 1.0) -> MweSolution:
    """Maximize the weighted entropy for the given raw ill-calibrated counts.

    Outcomes with zero counts keep a zero frequency. ``t`` is the weight
    exponent; values below one flatten the weights.
    """
    n = np.asarray(ill_counts, dtype=float)
    if n.ndim != 1 or np.any(n < 0):
        raise ValueError("counts must be a 1-d array of non-negative numbers")
    total = n.sum()
    if total <= 0:
        raise ValueError("at least one ill-calibrated count must be positive")
    pos = n > 0
    weights = np.zeros_like(n)
    weights[pos] = (n[pos] / total) ** t
    nu = np.zeros_like(n)
    log_nu = np.full_like(n, -np.inf)
    w = weights[pos]
    if pos.sum() == 1:
        nu[pos] = 1.0
        log_nu[pos] = 0.0
        lam = -float(w[0])
    else:
        lam = solve_multiplier(w)
        vals = _nu_of(lam, w)
        norm = vals.sum()
        nu[pos] = vals / norm
        log_nu[pos] = -1.0 - lam / w - np.log(norm)
    return MweSolution(nu=nu, lam=lam, n_mwe=total * nu, t=float(t), weights=weights, log_nu=log_nu)


def mwe_counts(counts: Counts, t: float = 1.0) -> Counts:
    """Replace ill-calibrated counts by their MWE re-estimates (well counts unchanged)."""
    if counts.N_ill == 0:
        return Counts(counts.well, tuple(0.0 for _ in counts.ill))
    sol = mwe_frequencies(counts.ill, t)
    return Counts(counts.well, tuple(float(x) for x in sol.n_mwe))
