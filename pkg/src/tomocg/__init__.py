"""Coarse-grained state tomography for ill-calibrated measurement outcomes."""
from .experiment import CampaignConfig, performance_range, run_campaign, summarize
from .mle import (
    LikelihoodSpec,
    SolverOptions,
    ml_estimate,
    reference_estimate,
    strategy1,
    strategy2,
    strategy3,
)
from .mwe import mwe_counts, mwe_frequencies, weighted_entropy
from .randgen import MeasurementSetup, SeedSpec, perturb_pom, random_rank1_pom
from .sampler import Counts, simulate_counts

__version__ = "0.1.0"
