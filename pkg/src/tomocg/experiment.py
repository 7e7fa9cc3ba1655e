"""Monte Carlo campaigns comparing noise-ignoring and coarse-grained reconstruction."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mle, qops, randgen, sampler
from .randgen import SeedSpec

log = logging.getLogger(__name__)

TRIALS_HEADER = [
    "state_id", "gamma", "mu", "experiment_id", "concurrence",
    "td_raw", "td_cg", "converged_raw", "converged_cg",
]
SUMMARY_HEADER = [
    "gamma", "mu", "pct_states_cg_better", "mean_pct_improvement",
    "std_pct_improvement", "mean_td_raw", "mean_td_cg",
]
# per-state raw distances at or below this count as "no error to improve on"
ZERO_TD = 1e-12


@dataclass(frozen=True)
class CampaignConfig:
    dim: int = 4
    m_total: int = 16
    m_well: int = 0
    n_copies: int = 8000
    n_states: int = 250
    n_experiments: int = 20
    mu_list: tuple = tuple(round(0.05 * i, 2) for i in range(13))
    gamma_list: tuple = (0.0, 0.1, 0.2)
    t_exponent: float = 1.0
    master_seed: int = 20130101
    tol: float = 1e-8
    max_iters: int = 100_000

    def __post_init__(self):
        if self.dim < 2 or self.m_total < self.dim**2:
            raise ValueError("need dim >= 2 and m_total >= dim^2")
        if not 0 <= self.m_well <= self.m_total:
            raise ValueError("m_well must lie in [0, m_total]")
        for name in ("n_copies", "n_states", "n_experiments"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if any(not 0 <= g <= 1 for g in self.gamma_list) or any(not 0 <= m <= 1 for m in self.mu_list):
            raise ValueError("gamma and mu values must lie in [0, 1]")

    @property
    def solver(self) -> mle.SolverOptions:
        return mle.SolverOptions(tol=self.tol, max_iters=self.max_iters)

    @classmethod
    def from_text(cls, text: str) -> "CampaignConfig":
        """Parse flat ``key = value`` lines; lists are comma-separated."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise ValueError(f"line {lineno}: unrecognized entry {raw!r}")
            if key.endswith("_list"):
                kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif types[key] == "int":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrialRecord:
    state_id: int
    gamma: float
    mu: float
    experiment_id: int
    concurrence: float
    td_raw: float
    td_cg: float
    converged_raw: bool
    converged_cg: bool


@dataclass(frozen=True)
class SummaryRow:
    gamma: float
    mu: float
    pct_states_cg_better: float
    mean_pct_improvement: float
    std_pct_improvement: float
    mean_td_raw: float
    mean_td_cg: float
    n_excluded: int = field(default=0, compare=False)


def _state_trials(config: CampaignConfig, pom, state_id: int) -> list[TrialRecord]:
    seed = SeedSpec(config.master_seed)
    pure = randgen.haar_pure_state(config.dim, seed.child(state_id, 0, 0, randgen.STATE))
    conc = qops.concurrence(pure) if config.dim == 4 else math.nan
    opts = config.solver
    has_ill = config.m_well < config.m_total
    out = []
    for gamma in config.gamma_list:
        rho_true = qops.admix(pure, gamma)
        for mi, mu in enumerate(config.mu_list):
            for e in range(config.n_experiments):
                # noise and counts streams do not depend on gamma (common random numbers)
                setup = randgen.perturb_pom(
                    pom, config.m_well, mu, seed.child(state_id, mi, e, randgen.NOISE)
                )
                counts = sampler.simulate_counts(
                    rho_true, setup, config.n_copies, seed.child(state_id, mi, e, randgen.COUNTS)
                )
                ref = mle.reference_estimate(counts, setup, opts)
                raw = mle.strategy1(counts, setup, opts)
                td_raw = qops.trace_distance(raw.rho_hat, ref.rho_hat)
                if has_ill:
                    cg = mle.strategy3(counts, setup, config.t_exponent, opts)
                    td_cg, cg_ok = qops.trace_distance(cg.rho_hat, ref.rho_hat), cg.converged
                else:
                    td_cg, cg_ok = math.nan, False
                out.append(TrialRecord(
                    state_id, float(gamma), float(mu), e, conc,
                    td_raw, td_cg, raw.converged and ref.converged, cg_ok and ref.converged,
                ))
    return out


def _n_workers() -> int:
    env = os.environ.get("TOMOCG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_trials(config: CampaignConfig, workers: int | None = None) -> list[TrialRecord]:
    pom = randgen.random_rank1_pom(
        config.dim, config.m_total, SeedSpec(config.master_seed, (0, 0, 0, randgen.POM))
    )
    workers = workers or _n_workers()
    ids = range(config.n_states)
    if workers == 1:
        chunks = [_state_trials(config, pom, s) for s in ids]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_state_trials, [config] * len(ids), [pom] * len(ids), ids))
    gi = {g: i for i, g in enumerate(config.gamma_list)}
    mi = {m: i for i, m in enumerate(config.mu_list)}
    trials = [t for chunk in chunks for t in chunk]
    trials.sort(key=lambda t: (t.state_id, gi[t.gamma], mi[t.mu], t.experiment_id))
    return trials


def summarize(trials: list[TrialRecord]) -> list[SummaryRow]:
    """Fold trial records into one row per (gamma, mu) cell.

    Distances are first averaged over each state's converged experiments;
    the percentage improvement of a state is ``100 (raw - cg) / raw`` on those
    averages and is undefined (NaN) when the raw distance is zero.
    """
    cells: dict = {}
    for t in trials:
        cells.setdefault((t.gamma, t.mu), {}).setdefault(t.state_id, []).append(t)
    rows = []
    for (gamma, mu), by_state in sorted(cells.items()):
        raw_means, cg_means, excluded = [], [], 0
        for sid in sorted(by_state):
            ok = [t for t in by_state[sid] if t.converged_raw and t.converged_cg]
            excluded += len(by_state[sid]) - len(ok)
            if ok:
                raw_means.append(np.mean([t.td_raw for t in ok]))
                cg_means.append(np.mean([t.td_cg for t in ok]))
        if excluded:
            log.warning("gamma=%g mu=%g: %d non-converged trials excluded", gamma, mu, excluded)
        raw_a, cg_a = np.array(raw_means), np.array(cg_means)
        if raw_a.size == 0:
            rows.append(SummaryRow(gamma, mu, *[math.nan] * 5, n_excluded=excluded))
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            pct = np.where(raw_a > ZERO_TD, 100 * (raw_a - cg_a) / raw_a, np.nan)
        finite = pct[np.isfinite(pct)]
        rows.append(SummaryRow(
            gamma=gamma,
            mu=mu,
            pct_states_cg_better=float(100 * np.mean(cg_a < raw_a)),
            mean_pct_improvement=float(finite.mean()) if finite.size else math.nan,
            std_pct_improvement=float(finite.std(ddof=1)) if finite.size > 1 else math.nan,
            mean_td_raw=float(raw_a.mean()),
            mean_td_cg=float(cg_a.mean()),
            n_excluded=excluded,
        ))
    return rows


def run_campaign(config: CampaignConfig, workers: int | None = None):
    trials = run_trials(config, workers)
    return trials, summarize(trials)


def performance_range(rows: list[SummaryRow]) -> tuple[float, float] | None:
    """Noise interval where the mean improvement exceeds its standard deviation.

    ``rows`` should share one gamma. Crossing points are linearly interpolated
    between grid values; rows with undefined statistics are skipped. When the
    margin is positive on several disjoint intervals the one holding the
    largest margin is returned; ``None`` means it is never positive.
    """
    pts = sorted(
        (r.mu, r.mean_pct_improvement - (r.std_pct_improvement if np.isfinite(r.std_pct_improvement) else 0.0))
        for r in rows
        if np.isfinite(r.mean_pct_improvement)
    )
    if len(pts) < 2:
        raise ValueError("need at least two noise levels with defined statistics")
    mu = np.array([p[0] for p in pts])
    margin = np.array([p[1] for p in pts])
    if not np.any(margin > 0):
        return None
    best = int(np.argmax(margin))
    lo = best
    while lo > 0 and margin[lo - 1] > 0:
        lo -= 1
    hi = best
    while hi < len(mu) - 1 and margin[hi + 1] > 0:
        hi += 1

    def crossing(a, b):
        return mu[a] + (mu[b] - mu[a]) * margin[a] / (margin[a] - margin[b])

    left = mu[lo] if lo == 0 else crossing(lo - 1, lo)
    right = mu[hi] if hi == len(mu) - 1 else crossing(hi, hi + 1)
    return float(left), float(right)


# --- CSV --------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def trials_to_csv(trials: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIALS_HEADER)
    for t in trials:
        w.writerow([_cell(getattr(t, k)) for k in TRIALS_HEADER])
    return buf.getvalue()


def trials_from_csv(text: str) -> list[TrialRecord]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append(TrialRecord(
            state_id=int(r["state_id"]),
            gamma=float(r["gamma"]),
            mu=float(r["mu"]),
            experiment_id=int(r["experiment_id"]),
            concurrence=float(r["concurrence"]),
            td_raw=float(r["td_raw"]),
            td_cg=float(r["td_cg"]),
            converged_raw=r["converged_raw"] == "1",
            converged_cg=r["converged_cg"] == "1",
        ))
    return out


def summary_to_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([_cell(float(getattr(r, k))) for k in SUMMARY_HEADER])
    return buf.getvalue()


def write_outputs(out_dir, trials, summary) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trials.csv").write_text(trials_to_csv(trials))
    (out / "summary.csv").write_text(summary_to_csv(summary))
