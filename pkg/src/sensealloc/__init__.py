"""Time-constrained sensing-scheme simulation for four-target detection.

Estimates mutual information and MAP detection probability for any
allocation of a sensing-time budget across the 15 sum-combination
observations of four binary-intensity targets, over vector Poisson and
Gaussian channels.
"""

from .channel import Channel, SeededRng, derive_seed
from .detection import bayes_risk, estimate_pd, map_decide
from .entropy import (
    Estimate,
    StratifiedPlan,
    conditional_entropy_gaussian,
    conditional_entropy_poisson,
    estimate_output_entropy,
    exact_mi_quadruplet_poisson,
    make_plan,
    mutual_information,
    poisson_entropy_rate,
)
from .model import (
    Hypothesis,
    ModelParams,
    TimeAllocation,
    enumerate_hypotheses,
    hypothesis_prior,
)
from .optimize import SearchConfig, SearchResult, project_to_budget, search
from .schemes import (
    Scheme,
    SweepRow,
    allocation_for,
    concavity_check,
    pure_schemes,
    sweep_alpha,
    sweep_time,
)

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "Estimate",
    "Hypothesis",
    "ModelParams",
    "Scheme",
    "SearchConfig",
    "SearchResult",
    "SeededRng",
    "StratifiedPlan",
    "SweepRow",
    "TimeAllocation",
    "allocation_for",
    "bayes_risk",
    "concavity_check",
    "conditional_entropy_gaussian",
    "conditional_entropy_poisson",
    "derive_seed",
    "enumerate_hypotheses",
    "estimate_output_entropy",
    "estimate_pd",
    "exact_mi_quadruplet_poisson",
    "hypothesis_prior",
    "make_plan",
    "map_decide",
    "mutual_information",
    "poisson_entropy_rate",
    "project_to_budget",
    "pure_schemes",
    "search",
    "sweep_alpha",
    "sweep_time",
    "__version__",
]
