"""MAP decision among the 16 hypotheses and its probability of total correct detection.

Under 0-1 cost the Bayes rule decides the hypothesis maximizing
prior x likelihood.  The probability of total correct detection P_d
(one minus the Bayes risk) is estimated by stratified Monte Carlo with
the same per-hypothesis apportionment used for entropy estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    Channel,
    SeededRng,
    log_likelihood_matrix,
    log_priors,
    sample_batch,
)
from .entropy import DEFAULT_CHUNK, Estimate, _chunk_sizes, make_plan
from .model import ModelParams, N_ROWS, TimeAllocation, enumerate_hypotheses, priors_vector


@dataclass(frozen=True)
class DecisionOutcome:
    decided: int
    truth: int
    correct: bool

    def __post_init__(self) -> None:
        if self.correct != (self.decided == self.truth):
            raise ValueError("correct flag must equal (decided == truth)")

    @classmethod
    def compare(cls, decided: int, truth: int) -> DecisionOutcome:
        return cls(decided, truth, decided == truth)


def decide_batch(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    params: ModelParams,
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """MAP decisions for a batch of observations (shape (n, len(rows))).

    Ties break toward the lowest hypothesis index; hypotheses with zero
    prior score -inf and never win.
    """
    scores = log_likelihood_matrix(channel, y, alloc, params, rows=rows)
    scores = scores + log_priors(params)[None, :]
    return np.argmax(scores, axis=1)


def map_decide(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    params: ModelParams,
) -> int:
    """Index of the hypothesis maximizing prior x likelihood of the observation."""
    y = np.asarray(y)
    if y.shape != (N_ROWS,):
        raise ValueError(f"expected a {N_ROWS}-vector observation, got shape {y.shape}")
    return int(decide_batch(channel, y[None, :], alloc, params)[0])


def estimate_pd(
    channel: Channel,
    alloc: TimeAllocation,
    params: ModelParams,
    n_samples: int,
    rng: SeededRng,
    *,
    chunk_size: int = DEFAULT_CHUNK,
) -> Estimate:
    """Stratified Monte-Carlo estimate of P_d, the Bayes probability of
    deciding the true hypothesis.

    Per-stratum success rates are weighted by the exact priors rather than
    the realized sample fractions, which removes apportionment-rounding
    bias; the standard error propagates the per-stratum binomial variances.

    Decisions are scored on rows with positive dwell time only: rows with
    zero time have the same conditional law under every hypothesis, so they
    shift all 16 scores equally and cannot change the argmax.
    """
    plan = make_plan(params, n_samples)
    priors = priors_vector(params)
    rows = alloc.active_rows()
    value = 0.0
    variance = 0.0
    for h in enumerate_hypotheses():
        pi = priors[h.index]
        if pi == 0.0:
            continue
        count = plan.counts[h.index]
        if count == 0:
            raise ValueError(
                f"hypothesis {h.index} has prior {pi} but zero planned samples; "
                f"increase n_samples"
            )
        correct = 0
        for j, m in enumerate(_chunk_sizes(count, chunk_size)):
            stream = rng.split("detect", h.index, j)
            y = sample_batch(channel, alloc, h, params, m, stream, rows=rows)
            decided = decide_batch(channel, y, alloc, params, rows=rows)
            correct += int((decided == h.index).sum())
        rate = correct / count
        value += pi * rate
        variance += pi * pi * rate * (1.0 - rate) / count
    return Estimate(value, math.sqrt(variance), plan.total)


def bayes_risk(
    channel: Channel,
    alloc: TimeAllocation,
    params: ModelParams,
    n_samples: int,
    rng: SeededRng,
    *,
    chunk_size: int = DEFAULT_CHUNK,
) -> Estimate:
    """Average 0-1 cost of the MAP rule: exactly 1 - P_d, same standard error."""
    pd = estimate_pd(channel, alloc, params, n_samples, rng, chunk_size=chunk_size)
    return Estimate(1.0 - pd.value, pd.stderr, pd.n_samples)
