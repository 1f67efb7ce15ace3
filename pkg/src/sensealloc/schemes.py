"""Named sensing schemes, hybrid configurations, and metric sweeps.

The four pure schemes split a total budget T equally within one structural
group: singlets (T/4 on each individual-target row), pairs (T/6 on each
pair row), triplets (T/4 on each triple row), and the quadruplet (all of T
on the all-targets row).  A hybrid configuration gives the all-targets row
a fixed time alpha and divides the remaining T - alpha equally over one
pure group.  Sweeps evaluate mutual information and/or detection
probability over grids of T or alpha; every grid cell runs on a stream
keyed by the master seed and the cell's coordinates, so tables are
reproducible regardless of worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Channel, SeededRng, derive_seed
from .detection import estimate_pd
from .entropy import Estimate, mutual_information
from .model import ModelParams, TimeAllocation

PURE_TAGS = ("singlets", "pairs", "triplets", "quadruplet")
HYBRID_TAGS = ("hybrid1", "hybrid2", "hybrid3")
CUSTOM_TAG = "custom"
ALL_TAGS = PURE_TAGS + HYBRID_TAGS + (CUSTOM_TAG,)

#: Pure group that shares the budget with the all-targets row in each hybrid.
HYBRID_BASE = {"hybrid1": "singlets", "hybrid2": "pairs", "hybrid3": "triplets"}

METRICS = ("mi_bits", "pd")

BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class Scheme:
    """A named time-allocation rule.

    alpha is the all-targets dwell time and is meaningful only for hybrid
    tags; abcd are the per-group times of a custom group-constant
    allocation and are meaningful only for the custom tag.
    """

    tag: str
    alpha: float | None = None
    abcd: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.tag not in ALL_TAGS:
            raise ValueError(f"unknown scheme tag {self.tag!r}")
        if (self.alpha is not None) != (self.tag in HYBRID_TAGS):
            raise ValueError("alpha must be given exactly for hybrid schemes")
        if (self.abcd is not None) != (self.tag == CUSTOM_TAG):
            raise ValueError("abcd must be given exactly for custom schemes")
        if self.alpha is not None and (not math.isfinite(self.alpha) or self.alpha < 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.abcd is not None:
            abcd = tuple(float(v) for v in self.abcd)
            if len(abcd) != 4 or any(not math.isfinite(v) or v < 0.0 for v in abcd):
                raise ValueError(f"abcd must be four finite nonnegative reals, got {self.abcd}")
            object.__setattr__(self, "abcd", abcd)

    @classmethod
    def singlets(cls) -> Scheme:
        return cls("singlets")

    @classmethod
    def pairs(cls) -> Scheme:
        return cls("pairs")

    @classmethod
    def triplets(cls) -> Scheme:
        return cls("triplets")

    @classmethod
    def quadruplet(cls) -> Scheme:
        return cls("quadruplet")

    @classmethod
    def hybrid(cls, which: int, alpha: float) -> Scheme:
        if which not in (1, 2, 3):
            raise ValueError(f"hybrid config must be 1, 2 or 3, got {which}")
        return cls(f"hybrid{which}", alpha=alpha)

    @classmethod
    def custom(cls, a: float, b: float, c: float, d: float) -> Scheme:
        return cls(CUSTOM_TAG, abcd=(a, b, c, d))

    def label(self) -> str:
        """Stable string form used in result tables and seed derivation."""
        if self.abcd is not None:
            a, b, c, d = self.abcd
            return f"custom[{a!r},{b!r},{c!r},{d!r}]"
        return self.tag


def pure_schemes() -> list[Scheme]:
    return [Scheme(tag) for tag in PURE_TAGS]


def allocation_for(scheme: Scheme, T: float, *, rescale: bool = False) -> TimeAllocation:
    """The 15-vector of dwell times that a scheme assigns to budget T.

    Hybrid schemes require 0 <= alpha <= T.  Custom schemes must satisfy
    4a + 6b + 4c + d = T within 1e-9 unless rescale is set, in which case
    the group times are scaled onto the budget.
    """
    if not math.isfinite(T) or T < 0.0:
        raise ValueError(f"T must be finite and >= 0, got {T}")
    if scheme.tag == "singlets":
        return TimeAllocation.from_group_times(T / 4.0, 0.0, 0.0, 0.0)
    if scheme.tag == "pairs":
        return TimeAllocation.from_group_times(0.0, T / 6.0, 0.0, 0.0)
    if scheme.tag == "triplets":
        return TimeAllocation.from_group_times(0.0, 0.0, T / 4.0, 0.0)
    if scheme.tag == "quadruplet":
        return TimeAllocation.from_group_times(0.0, 0.0, 0.0, T)
    if scheme.tag in HYBRID_TAGS:
        alpha = float(scheme.alpha)
        if alpha > T:
            raise ValueError(f"alpha {alpha} exceeds the budget T={T}")
        rest = T - alpha
        if scheme.tag == "hybrid1":
            return TimeAllocation.from_group_times(rest / 4.0, 0.0, 0.0, alpha)
        if scheme.tag == "hybrid2":
            return TimeAllocation.from_group_times(0.0, rest / 6.0, 0.0, alpha)
        return TimeAllocation.from_group_times(0.0, 0.0, rest / 4.0, alpha)
    a, b, c, d = scheme.abcd
    weighted = 4.0 * a + 6.0 * b + 4.0 * c + d
    if rescale:
        if T == 0.0:
            return TimeAllocation.zeros()
        if weighted == 0.0:
            raise ValueError("cannot rescale an all-zero custom allocation onto T > 0")
        scale = T / weighted
        a, b, c, d = a * scale, b * scale, c * scale, d * scale
    elif abs(weighted - T) > BUDGET_TOL:
        raise ValueError(
            f"custom group times give total {weighted}, not the budget T={T} "
            f"(pass rescale=True to scale them)"
        )
    return TimeAllocation.from_group_times(a, b, c, d)


@dataclass(frozen=True)
class SweepRow:
    """One (scheme, budget, metric) grid-cell result."""

    channel: str
    scheme: str
    T: float
    alpha: float | None
    p: float
    lambda0: float
    lambda1: float
    metric: str
    value: float
    stderr: float
    n_samples: int
    seed: int

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not (math.isfinite(self.value) and math.isfinite(self.stderr)):
            raise ValueError("value and stderr must be finite")


@dataclass(frozen=True)
class CellFailure:
    """Record of a grid cell whose estimator raised instead of returning."""

    channel: str
    scheme: str
    T: float
    alpha: float | None
    p: float
    lambda0: float
    lambda1: float
    metric: str
    message: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    failures: list[CellFailure]

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class _CellJob:
    channel: Channel
    scheme: Scheme
    T: float
    params: ModelParams
    metric: str
    n_samples: int
    seed: int


def _canonical_metrics(metrics) -> tuple[str, ...]:
    chosen = set(metrics)
    unknown = chosen - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics {sorted(unknown)}; valid: {METRICS}")
    if not chosen:
        raise ValueError("at least one metric is required")
    return tuple(m for m in METRICS if m in chosen)


def cell_seed(
    master_seed: int,
    channel: Channel,
    scheme: Scheme,
    T: float,
    params: ModelParams,
    metric: str,
    n_samples: int,
) -> int:
    """Per-cell stream seed keyed by the cell's grid coordinates.

    Keying by coordinates rather than execution order is what makes sweep
    tables independent of worker scheduling.
    """
    return derive_seed(
        master_seed,
        "cell",
        channel.value,
        scheme.label(),
        repr(None if scheme.alpha is None else float(scheme.alpha)),
        repr(float(T)),
        repr(params.p),
        repr(params.lambda0),
        repr(params.lambda1),
        metric,
        n_samples,
    )


def evaluate_metric(
    channel: Channel,
    alloc: TimeAllocation,
    params: ModelParams,
    metric: str,
    n_samples: int,
    rng: SeededRng,
) -> Estimate:
    if metric == "mi_bits":
        return mutual_information(channel, alloc, params, n_samples, rng)
    if metric == "pd":
        return estimate_pd(channel, alloc, params, n_samples, rng)
    raise ValueError(f"unknown metric {metric!r}")


def _run_cell(job: _CellJob):
    """Evaluate one grid cell; failures are reported, never raised, so a bad
    cell cannot abort a long sweep.  Top level so process pools can pickle it."""
    seed = cell_seed(
        job.seed, job.channel, job.scheme, job.T, job.params, job.metric, job.n_samples
    )
    try:
        alloc = allocation_for(job.scheme, job.T)
        est = evaluate_metric(
            job.channel, alloc, job.params, job.metric, job.n_samples, SeededRng(seed)
        )
        row = SweepRow(
            channel=job.channel.value,
            scheme=job.scheme.label(),
            T=float(job.T),
            alpha=job.scheme.alpha,
            p=job.params.p,
            lambda0=job.params.lambda0,
            lambda1=job.params.lambda1,
            metric=job.metric,
            value=est.value,
            stderr=est.stderr,
            n_samples=est.n_samples,
            seed=seed,
        )
        return ("ok", row)
    except Exception as exc:
        failure = CellFailure(
            channel=job.channel.value,
            scheme=job.scheme.label(),
            T=float(job.T),
            alpha=job.scheme.alpha,
            p=job.params.p,
            lambda0=job.params.lambda0,
            lambda1=job.params.lambda1,
            metric=job.metric,
            message=f"{type(exc).__name__}: {exc}",
        )
        return ("err", failure)


def _collect(jobs: list[_CellJob], map_fn) -> SweepResult:
    result = SweepResult([], [])
    for status, payload in map_fn(_run_cell, jobs):
        if status == "ok":
            result.rows.append(payload)
        else:
            result.failures.append(payload)
    return result


def sweep_time(
    channel: Channel,
    schemes: list[Scheme],
    T_grid,
    params: ModelParams,
    metrics,
    n_samples: int,
    seed: int,
    map_fn=map,
) -> SweepResult:
    """Evaluate each scheme at each budget in T_grid, one row per metric.

    Rows come back in grid order (schemes outer, T inner, metrics
    innermost) and are bit-identical for a given (seed, grid, params)
    regardless of map_fn parallelism.
    """
    metrics = _canonical_metrics(metrics)
    jobs = [
        _CellJob(channel, scheme, float(T), params, metric, n_samples, seed)
        for scheme in schemes
        for T in T_grid
        for metric in metrics
    ]
    return _collect(jobs, map_fn)


def sweep_alpha(
    channel: Channel,
    configs,
    T: float,
    alpha_grid,
    params: ModelParams,
    metrics,
    n_samples: int,
    seed: int,
    map_fn=map,
) -> SweepResult:
    """Evaluate hybrid configurations over a grid of all-targets times alpha."""
    metrics = _canonical_metrics(metrics)
    tags = list(configs)
    for tag in tags:
        if tag not in HYBRID_TAGS:
            raise ValueError(f"sweep_alpha takes hybrid tags {HYBRID_TAGS}, got {tag!r}")
    for alpha in alpha_grid:
        if not 0.0 <= float(alpha) <= float(T):
            raise ValueError(f"alpha {alpha} outside [0, T={T}]")
    jobs = [
        _CellJob(channel, Scheme(tag, alpha=float(alpha)), float(T), params, metric, n_samples, seed)
        for tag in tags
        for alpha in alpha_grid
        for metric in metrics
    ]
    return _collect(jobs, map_fn)


@dataclass(frozen=True)
class ConcavityReport:
    """Outcome of an empirical second-difference concavity check."""

    max_positive_second_diff: float
    violations: tuple[int, ...]
    passed: bool


def concavity_check(series) -> ConcavityReport:
    """Check a uniformly spaced (x, value, stderr) series for concavity.

    A point i (interior) violates concavity when its second difference
    v[i-1] - 2 v[i] + v[i+1] exceeds three times that difference's
    propagated standard error.  Requires at least three points with
    strictly increasing, uniformly spaced x.
    """
    pts = [(float(x), float(v), float(s)) for x, v, s in series]
    if len(pts) < 3:
        raise ValueError("concavity check needs at least three points")
    x = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    s = np.array([p[2] for p in pts])
    dx = np.diff(x)
    if np.any(dx <= 0.0):
        raise ValueError("x values must be strictly increasing")
    spacing = dx.mean()
    if np.max(np.abs(dx - spacing)) > 1e-9 * max(1.0, abs(spacing)):
        raise ValueError("x values must be uniformly spaced")
    d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
    tol = 3.0 * np.sqrt(s[2:] ** 2 + 4.0 * s[1:-1] ** 2 + s[:-2] ** 2)
    violating = tuple(int(i) + 1 for i in np.flatnonzero(d2 > tol))
    positive = d2[d2 > 0.0]
    max_pos = float(positive.max()) if positive.size else 0.0
    return ConcavityReport(max_pos, violating, not violating)
