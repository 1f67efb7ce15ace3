"""Search over group-constant time allocations under a total budget.

The search space is the conjectured reduced structure (a, b, c, d): every
singlet row gets a, every pair row b, every triplet row c, and the
all-targets row d, constrained by 4a + 6b + 4c + d = T.  Phase 1 evaluates
the metric on a simplex grid spanned by the four pure-scheme vertices;
phase 2 refines the grid argmax by compass pattern search with shrinking
step, re-projecting onto the budget after every move.  Pattern search is
used because the objective is a noisy Monte-Carlo estimate: derivative-free
moves with noise-aware acceptance avoid chasing estimator fluctuations.
The tool reports the best point found; it makes no optimality claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

from .channel import Channel, SeededRng, derive_seed
from .entropy import Estimate
from .model import ModelParams, TimeAllocation
from .schemes import METRICS, evaluate_metric

#: Number of rows in each structural group, i.e. the budget weights of (a, b, c, d).
BUDGET_WEIGHTS = (4.0, 6.0, 4.0, 1.0)

BUDGET_TOL = 1e-9

Abcd = tuple[float, float, float, float]


@dataclass(frozen=True)
class SearchConfig:
    metric: str
    channel: Channel
    T: float
    grid_resolution: int = 5
    refine_iters: int = 20
    n_samples: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not math.isfinite(self.T) or self.T < 0.0:
            raise ValueError(f"T must be finite and >= 0, got {self.T}")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass
class SearchResult:
    best_abcd: Abcd
    best_estimate: Estimate
    evaluations: int
    trace: list[tuple[Abcd, Estimate]]


def budget_of(a: float, b: float, c: float, d: float) -> float:
    wa, wb, wc, wd = BUDGET_WEIGHTS
    return wa * a + wb * b + wc * c + wd * d


def project_to_budget(a: float, b: float, c: float, d: float, T: float) -> Abcd:
    """Scale nonnegative group times so that 4a + 6b + 4c + d = T."""
    if min(a, b, c, d) < 0.0:
        raise ValueError("group times must be nonnegative")
    total = budget_of(a, b, c, d)
    if total == 0.0:
        raise ValueError("cannot project an all-zero point onto the budget")
    scale = T / total
    return (a * scale, b * scale, c * scale, d * scale)


def simplex_grid(T: float, resolution: int) -> list[Abcd]:
    """Feasible grid points in lexicographic (a, b, c, d) order.

    Barycentric combinations of the four pure-scheme vertices with
    resolution points per axis, so the vertices themselves are always
    included and every point satisfies the budget constraint.
    """
    m = resolution - 1
    points = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            for k in range(m + 1 - i - j):
                l = m - i - j - k
                points.append(
                    (
                        i * T / (4.0 * m),
                        j * T / (6.0 * m),
                        k * T / (4.0 * m),
                        l * T / m,
                    )
                )
    points.sort()
    return points


def point_seed(config: SearchConfig, abcd: Abcd) -> int:
    """Evaluation-stream seed keyed by the point's coordinates, not visit order."""
    return derive_seed(
        config.seed,
        "search",
        config.channel.value,
        config.metric,
        config.n_samples,
        *(f"{v:.12e}" for v in abcd),
    )


def _evaluate_point(abcd: Abcd, config: SearchConfig, params: ModelParams) -> Estimate:
    """Metric estimate at one point, on a stream keyed by the coordinates.

    Coordinate-keyed streams make re-evaluations of the same point return
    the same value, so accept/reject comparisons are self-consistent and the
    whole trace is reproducible (top level + partial so pools can pickle it).
    """
    alloc = TimeAllocation.from_group_times(*abcd)
    return evaluate_metric(
        config.channel,
        alloc,
        params,
        config.metric,
        config.n_samples,
        SeededRng(point_seed(config, abcd)),
    )


def search(
    config: SearchConfig,
    params: ModelParams,
    objective=None,
    map_fn=map,
) -> SearchResult:
    """Grid-then-pattern-search maximization of the metric over (a, b, c, d).

    ``objective`` may replace the built-in estimator (it must map an abcd
    tuple to an Estimate); this is how tests drive the search with a
    deterministic surrogate.  The best point is the maximum over the whole
    evaluation trace, with grid ties resolved toward lexicographically
    smaller points.
    """
    evaluate = objective if objective is not None else partial(
        _evaluate_point, config=config, params=params
    )
    points = simplex_grid(config.T, config.grid_resolution)
    estimates = list(map_fn(evaluate, points))
    trace: list[tuple[Abcd, Estimate]] = list(zip(points, estimates))

    current, current_est = trace[0]
    for abcd, est in trace[1:]:
        if est.value > current_est.value:
            current, current_est = abcd, est

    step = config.T / (2.0 * (config.grid_resolution - 1))
    for _ in range(config.refine_iters):
        moved = False
        for axis in range(4):
            for sign in (1.0, -1.0):
                candidate = list(current)
                candidate[axis] = max(candidate[axis] + sign * step, 0.0)
                if budget_of(*candidate) == 0.0:
                    continue
                candidate = project_to_budget(*candidate, config.T)
                if max(abs(c - v) for c, v in zip(candidate, current)) <= 1e-12 * max(1.0, config.T):
                    continue
                est = evaluate(candidate)
                trace.append((candidate, est))
                gain = est.value - current_est.value
                if gain > math.hypot(est.stderr, current_est.stderr):
                    current, current_est = candidate, est
                    moved = True
        if not moved:
            step *= 0.5

    best, best_est = trace[0]
    for abcd, est in trace[1:]:
        if est.value > best_est.value:
            best, best_est = abcd, est
    return SearchResult(tuple(best), best_est, len(trace), trace)
