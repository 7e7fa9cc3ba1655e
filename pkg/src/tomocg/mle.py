"""Maximum-likelihood reconstruction for sub-normalized outcome sets.

The likelihood uses the detection-conditioned probabilities ``p_l / eta`` with
``eta = sum_l p_l``. With ``G = sum_l P_l`` the substitution
``sigma = G^(1/2) rho G^(1/2) / tr(rho G)`` and ``P'_l = G^(-1/2) P_l G^(-1/2)``
turns it into the ordinary likelihood of a complete measurement, which is
maximized by the diluted ``R sigma R`` iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qops
from .mwe import mwe_counts
from .randgen import MeasurementSetup
from .sampler import Counts
from ._kernel import _fixed_point


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 100_000
    max_halvings: int = 60
    record_history: bool = False


@dataclass(frozen=True)
class LikelihoodSpec:
    outcomes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.outcomes, dtype=complex)
        n = np.asarray(self.counts, dtype=float)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"outcomes must have shape (L, D, D), got {ops.shape}")
        if n.shape != (ops.shape[0],):
            raise ValueError(f"{n.size} counts for {ops.shape[0]} outcomes")
        if np.any(n < 0) or n.sum() <= 0:
            raise ValueError("counts must be non-negative with a positive total")
        object.__setattr__(self, "outcomes", ops)
        object.__setattr__(self, "counts", n)

    @property
    def N(self) -> float:
        return float(self.counts.sum())

    @property
    def dim(self) -> int:
        return self.outcomes.shape[1]


@dataclass(frozen=True)
class EstimationResult:
    rho_hat: np.ndarray
    log_likelihood: float
    iterations: int
    residual: float
    converged: bool
    possibly_non_unique: bool = False
    history: list = field(default_factory=list, repr=False)


class StrategyInapplicable(ValueError):
    pass


def _tr_products(ops_flat_conj: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return (ops_flat_conj @ rho.ravel()).real


def probabilities(rho: np.ndarray, outcomes) -> tuple[np.ndarray, float]:
    """Outcome probabilities ``tr(rho P_l)`` (clamped at 0) and their sum ``eta``."""
    ops = np.asarray(outcomes, dtype=complex)
    rho = np.asarray(rho)
    if ops.shape[1:] != rho.shape:
        raise ValueError(f"state shape {rho.shape} does not match outcomes {ops.shape[1:]}")
    p = np.clip(_tr_products(ops.reshape(len(ops), -1).conj(), rho), 0, None)
    return p, float(p.sum())


def log_likelihood(spec: LikelihoodSpec, rho: np.ndarray) -> float:
    """``sum_l n_l log(p_l / eta)``; ``-inf`` when a fired outcome has zero probability."""
    p, eta = probabilities(rho, spec.outcomes)
    fired = spec.counts > 0
    if eta <= 0 or np.any(p[fired] <= 0):
        return -np.inf
    return float(np.sum(spec.counts[fired] * np.log(p[fired] / eta)))




def ml_estimate(spec: LikelihoodSpec, options: SolverOptions | None = None) -> EstimationResult:
    opts = options or SolverOptions()
    d = spec.dim
    g = spec.outcomes.sum(axis=0)
    g = (g + g.conj().T) / 2
    try:
        g_mhalf = qops.sqrt_inv(g)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "outcome sum is singular; a support-restricted reconstruction would be needed"
        ) from exc

    fired = spec.counts > 0
    n = spec.counts[fired]
    ops = np.ascontiguousarray(g_mhalf @ spec.outcomes[fired] @ g_mhalf)
    hist = np.empty(opts.max_iters + 1 if opts.record_history else 1)
    sigma, it, residual, converged, n_hist = _fixed_point(
        ops, n, opts.tol, opts.max_iters, opts.max_halvings, hist, opts.record_history
    )
    history = hist[:n_hist].tolist() if opts.record_history else []

    rho = g_mhalf @ sigma @ g_mhalf
    rho = (rho + rho.conj().T) / 2
    rho = qops.psd_project(rho / np.trace(rho).real)
    rho = rho / np.trace(rho).real
    return EstimationResult(
        rho_hat=rho,
        log_likelihood=log_likelihood(spec, rho),
        iterations=it,
        residual=float(residual),
        converged=converged,
        history=history,
    )


# --- strategies -----------------------------------------------------------


def strategy1(counts: Counts, setup: MeasurementSetup, options: SolverOptions | None = None):
    """Ignore the noise: treat the intended outcomes as the measured ones."""
    spec = LikelihoodSpec(np.array(setup.assumed_outcomes()), counts.as_array())
    return ml_estimate(spec, options)


def strategy2(counts: Counts, setup: MeasurementSetup, options: SolverOptions | None = None):
    """Discard the ill-calibrated data and use only the well-calibrated outcomes."""
    if setup.m_well == 0:
        raise StrategyInapplicable("no well-calibrated outcomes: strategy 2 cannot be used")
    from .randgen import gram_rank

    spec = LikelihoodSpec(np.array(setup.well), np.asarray(counts.well, dtype=float))
    res = ml_estimate(spec, options)
    incomplete = gram_rank(setup.well) < setup.dim**2
    return EstimationResult(
        res.rho_hat, res.log_likelihood, res.iterations, res.residual, res.converged,
        possibly_non_unique=incomplete, history=res.history,
    )


def strategy3(counts: Counts, setup: MeasurementSetup, t: float = 1.0, options: SolverOptions | None = None):
    """Coarse-grain the ill-calibrated counts by MWE, then reconstruct with the intended outcomes."""
    cg = mwe_counts(counts, t)
    spec = LikelihoodSpec(np.array(setup.assumed_outcomes()), cg.as_array())
    return ml_estimate(spec, options)


def reference_estimate(counts: Counts, setup: MeasurementSetup, options: SolverOptions | None = None):
    """Estimate with the actual noisy outcomes (only possible in simulation)."""
    spec = LikelihoodSpec(np.array(setup.actual_outcomes()), counts.as_array())
    return ml_estimate(spec, options)
