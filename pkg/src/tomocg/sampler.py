"""Detection-event simulation and the counts record."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .randgen import MeasurementSetup, _as_rng

NEG_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Counts:
    """Tallies for well-calibrated outcomes followed by ill-calibrated ones.

    Entries are integers for simulated data; the coarse-grained record produced
    by :func:`tomocg.mwe.mwe_counts` carries real-valued ill counts.
    """

    well: tuple
    ill: tuple

    def __post_init__(self):
        if any(c < 0 for c in (*self.well, *self.ill)):
            raise ValueError("counts must be non-negative")

    @property
    def N(self):
        return sum(self.well) + sum(self.ill)

    @property
    def N_ill(self):
        return sum(self.ill)

    def as_array(self) -> np.ndarray:
        return np.array([*self.well, *self.ill], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "role", "count"])
        for i, c in enumerate(self.well):
            w.writerow([i, "well", _fmt(c)])
        for k, c in enumerate(self.ill):
            w.writerow([len(self.well) + k, "ill", _fmt(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Counts":
        rows = sorted(csv.DictReader(io.StringIO(text)), key=lambda r: int(r["index"]))
        well, ill = [], []
        for r in rows:
            tok = r["count"].strip()
            c = int(tok) if tok.isdigit() else float(tok)
            if r["role"] == "well":
                if ill:
                    raise ValueError("well outcomes must precede ill-calibrated ones")
                well.append(c)
            elif r["role"] == "ill":
                ill.append(c)
            else:
                raise ValueError(f"unknown role {r['role']!r}")
        return cls(tuple(well), tuple(ill))

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read(cls, path) -> "Counts":
        return cls.from_csv(Path(path).read_text())


def _fmt(c) -> str:
    return str(c) if isinstance(c, (int, np.integer)) else repr(float(c))


def detection_probabilities(rho: np.ndarray, outcomes) -> np.ndarray:
    ops = np.asarray(outcomes)
    if ops.shape[1:] != np.shape(rho):
        raise ValueError(f"state shape {np.shape(rho)} does not match outcomes {ops.shape[1:]}")
    # tr(rho P) = sum_ij rho_ij conj(P_ij) for Hermitian P
    return np.einsum("ij,lij->l", rho, ops.conj()).real


def simulate_counts(rho_true: np.ndarray, setup: MeasurementSetup, n: int, seed) -> Counts:
    """Draw ``n`` clicks from the actual outcomes, conditional on detection."""
    if n < 1:
        raise ValueError(f"number of copies must be positive, got {n}")
    p = detection_probabilities(rho_true, setup.actual_outcomes())
    if np.any(p < -NEG_PROB_TOL):
        raise ValueError(f"setup yields negative probability {p.min():.3e}")
    p = np.clip(p, 0, None)
    eta = p.sum()
    if eta <= 0:
        raise ValueError("no outcome can fire for this state")
    cdf = np.cumsum(p / eta)
    u = _as_rng(seed).random(n)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    tally = np.bincount(idx, minlength=len(p))
    m1 = setup.m_well
    return Counts(tuple(int(c) for c in tally[:m1]), tuple(int(c) for c in tally[m1:]))
