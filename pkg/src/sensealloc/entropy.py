"""Output entropy, conditional entropy, and mutual information in bits.

The output distribution is a 16-component mixture with no closed-form
entropy in either channel, so H(Y) is estimated by stratified Monte Carlo:
sample counts per mixture component are apportioned proportionally to the
priors, the mixture log-density is evaluated at every sample, and the
estimate is the mean of -log2 density with its standard error.  Conditional
entropies are exact (closed form for the unit-variance Gaussian channel,
truncated sums for Poisson), so the mutual-information estimate
I(X;Y) = H(Y) - H(Y|X) inherits its error purely from the H(Y) term.

For the Gaussian channel the mixture density is evaluated over rows with
positive dwell time only; every inactive row is an independent standard
normal in all components and contributes exactly 0.5*log2(2*pi*e) to both
H(Y) and H(Y|X).  The constant is added back so H(Y) always refers to the
full 15-dimensional observation, and ``full_dims=True`` restores the
all-rows evaluation for direct comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp
from scipy.stats import poisson as poisson_dist

from .channel import Channel, SeededRng, log_mixture_batch, sample_batch
from .model import (
    ModelParams,
    N_HYPOTHESES,
    N_ROWS,
    TimeAllocation,
    enumerate_hypotheses,
    poisson_rate_matrix,
    priors_vector,
)

LN2 = math.log(2.0)
HALF_LOG2_2PIE = 0.5 * math.log2(2.0 * math.pi * math.e)

#: Upper-tail mass kept outside the truncated Poisson support (the double
#: machine epsilon halved, used verbatim in the truncation rule).
TRUNCATION_TAIL = 1.110223024625157e-16

DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo scalar (bits or probability) with its standard error."""

    value: float
    stderr: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.stderr < 0.0:
            raise ValueError("stderr must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class StratifiedPlan:
    """Per-hypothesis sample counts apportioned proportionally to the priors."""

    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


def make_plan(params: ModelParams, n_samples: int) -> StratifiedPlan:
    """Largest-remainder apportionment of n_samples across the 16 priors.

    Each count differs from the exact quota n_samples * prior by less than
    one sample.  Remainder ties break toward the lower hypothesis index, so
    the plan is deterministic.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    quotas = n_samples * priors_vector(params)
    counts = np.floor(quotas).astype(int)
    leftover = n_samples - int(counts.sum())
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:leftover]] += 1
    return StratifiedPlan(tuple(int(c) for c in counts))


def conditional_entropy_gaussian(dims: int = N_ROWS) -> float:
    """H(Y|X) of the unit-variance Gaussian channel: dims * 0.5 * log2(2*pi*e)."""
    if dims < 0:
        raise ValueError("dims must be >= 0")
    return dims * HALF_LOG2_2PIE


def poisson_truncation_point(rate: float) -> int:
    """Support cutoff for entropy sums: twice the (1 - tail-mass) quantile."""
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    if rate == 0.0:
        return 0
    return int(2 * poisson_dist.ppf(1.0 - TRUNCATION_TAIL, rate))


@lru_cache(maxsize=4096)
def poisson_entropy_rate(rate: float) -> float:
    """Entropy in bits of a Poisson count with the given rate.

    Computed as a finite sum of -p*log2(p) over 0..truncation point; a rate
    of 0 is the degenerate distribution at 0 with entropy 0.
    """
    rate = float(rate)
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    if rate == 0.0:
        return 0.0
    support = np.arange(poisson_truncation_point(rate) + 1)
    logp = poisson_dist.logpmf(support, rate)
    return float(-(np.exp(logp) * logp).sum() / LN2)


def conditional_entropy_poisson(alloc: TimeAllocation, params: ModelParams) -> float:
    """H(Y|X) of the Poisson channel in bits, exact up to truncation error.

    Conditioned on a hypothesis the 15 counts are independent, so the joint
    conditional entropy is the prior-weighted sum of per-row Poisson
    entropies; no Monte Carlo is involved.
    """
    rates = poisson_rate_matrix(alloc, params)
    priors = priors_vector(params)
    total = 0.0
    for h in range(N_HYPOTHESES):
        if priors[h] == 0.0:
            continue
        total += priors[h] * sum(poisson_entropy_rate(r) for r in rates[h])
    return total


def _chunk_sizes(count: int, chunk_size: int) -> list[int]:
    full, rem = divmod(count, chunk_size)
    return [chunk_size] * full + ([rem] if rem else [])


def estimate_output_entropy(
    channel: Channel,
    alloc: TimeAllocation,
    params: ModelParams,
    n_samples: int,
    rng: SeededRng,
    *,
    full_dims: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
) -> Estimate:
    """Stratified Monte-Carlo estimate of the output entropy H(Y) in bits.

    Draws the planned per-hypothesis sample counts in fixed-size chunks,
    each on an independent stream keyed by (seed, hypothesis, chunk), so the
    result does not depend on execution order.  The reported value always
    refers to the full 15-dimensional observation (see module docstring for
    the inactive-row bookkeeping).
    """
    plan = make_plan(params, n_samples)
    rows = np.arange(N_ROWS) if full_dims else alloc.active_rows()
    offset = 0.0
    if channel is Channel.GAUSSIAN and not full_dims:
        offset = (N_ROWS - rows.size) * HALF_LOG2_2PIE
    total = 0.0
    total_sq = 0.0
    n = 0
    for h in enumerate_hypotheses():
        count = plan.counts[h.index]
        if count == 0:
            continue
        for j, m in enumerate(_chunk_sizes(count, chunk_size)):
            stream = rng.split("entropy", h.index, j)
            y = sample_batch(channel, alloc, h, params, m, stream, rows=rows)
            bits = -log_mixture_batch(channel, y, alloc, params, rows=rows) / LN2
            total += float(bits.sum())
            total_sq += float((bits * bits).sum())
            n += m
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    stderr = math.sqrt(var / (n - 1)) if n > 1 else 0.0
    return Estimate(mean + offset, stderr, n)


def mutual_information(
    channel: Channel,
    alloc: TimeAllocation,
    params: ModelParams,
    n_samples: int,
    rng: SeededRng,
    *,
    full_dims: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
) -> Estimate:
    """I(X;Y) = H(Y) - H(Y|X) in bits.

    The conditional term is exact, so the standard error is that of the
    H(Y) Monte-Carlo mean.
    """
    hy = estimate_output_entropy(
        channel, alloc, params, n_samples, rng, full_dims=full_dims, chunk_size=chunk_size
    )
    if channel is Channel.GAUSSIAN:
        cond = conditional_entropy_gaussian()
    else:
        cond = conditional_entropy_poisson(alloc, params)
    return Estimate(hy.value - cond, hy.stderr, hy.n_samples)


def exact_mi_quadruplet_poisson(params: ModelParams, T: float) -> float:
    """Exact MI in bits when all dwell time sits on the all-targets row.

    The observation is then a single Poisson count whose rate depends only
    on how many targets are high, so the mixture collapses to at most five
    distinct components and both H(Y) and H(Y|X) reduce to direct sums over
    the truncated support (the union of the per-component cutoffs).  Serves
    as a sampling-free ground truth for validating the Monte-Carlo
    estimator; deliberately shares no code with it beyond scipy's pmf.
    """
    if T < 0.0:
        raise ValueError("T must be >= 0")
    if T == 0.0:
        return 0.0
    k = np.arange(5)
    weights = np.array(
        [math.comb(4, i) * params.p**i * (1.0 - params.p) ** (4 - i) for i in k]
    )
    rates = T * (k * params.lambda1 + (4 - k) * params.lambda0)
    y_max = 0
    for w, r in zip(weights, rates):
        if w > 0.0 and r > 0.0:
            y_max = max(y_max, int(2 * poisson_dist.ppf(1.0 - TRUNCATION_TAIL, r)))
    support = np.arange(y_max + 1)
    logp = np.full((5, y_max + 1), -np.inf)
    for i, r in enumerate(rates):
        if r > 0.0:
            logp[i] = poisson_dist.logpmf(support, r)
        else:
            logp[i, 0] = 0.0
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    log_mix = logsumexp(logw[:, None] + logp, axis=0)
    p_mix = np.exp(log_mix)
    h_y = float(-(p_mix * np.where(p_mix > 0.0, log_mix, 0.0)).sum() / LN2)
    h_y_given_x = 0.0
    for w, lp, r in zip(weights, logp, rates):
        if w == 0.0 or r == 0.0:
            continue
        h_y_given_x += w * float(-(np.exp(lp) * lp).sum() / LN2)
    return h_y - h_y_given_x
