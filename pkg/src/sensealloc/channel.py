"""Observation channels: sampling, log-likelihoods, and mixture log-density.

Both channels condition on one of the 16 input hypotheses.  Poisson
observations are independent counts with rate = dwell time x summed
intensity; Gaussian observations are the sqrt-time-scaled intensity sums
plus independent unit-variance noise.  All likelihood math is in natural
log; conversion to bits happens in the entropy module.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    Hypothesis,
    ModelParams,
    N_ROWS,
    TimeAllocation,
    gaussian_mean_matrix,
    gaussian_mean_vector,
    poisson_rate_matrix,
    poisson_rate_vector,
    priors_vector,
)

LOG_2PI = math.log(2.0 * math.pi)


class Channel(str, Enum):
    """The two observation models."""

    POISSON = "poisson"
    GAUSSIAN = "gaussian"


def derive_seed(*parts: object) -> int:
    """Hash a label path to a 64-bit seed, stably across platforms and runs."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class SeededRng:
    """Deterministic random stream with keyed child-stream derivation.

    Philox is counter-based, so a given seed reproduces the same draw
    sequence on every platform.  ``split`` derives an independent child
    stream from the seed and a label path without consuming parent state,
    which keeps chunked estimation independent of execution order.
    """

    seed: int
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**128:
            raise ValueError(f"seed must be a nonnegative 128-bit integer, got {self.seed}")
        self.generator = np.random.Generator(np.random.Philox(key=self.seed))

    def split(self, *labels: object) -> SeededRng:
        """Independent child stream keyed by (seed, labels)."""
        return SeededRng(derive_seed(self.seed, *labels))


def log_priors(params: ModelParams) -> np.ndarray:
    """Natural-log priors over the 16 hypotheses, -inf where the prior is 0."""
    priors = priors_vector(params)
    with np.errstate(divide="ignore"):
        return np.log(priors)


def _resolve_rows(rows: np.ndarray | None) -> np.ndarray:
    if rows is None:
        return np.arange(N_ROWS)
    return np.asarray(rows, dtype=int)


def sample_batch(
    channel: Channel,
    alloc: TimeAllocation,
    h: Hypothesis,
    params: ModelParams,
    n: int,
    rng: SeededRng,
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """Draw n observations conditioned on h, restricted to the given rows.

    Rows with zero Poisson rate yield the constant 0, so a single code path
    covers allocations with zeroed times.
    """
    rows = _resolve_rows(rows)
    if channel is Channel.POISSON:
        rates = poisson_rate_vector(alloc, h, params)[rows]
        return rng.generator.poisson(rates, size=(n, rows.size))
    means = gaussian_mean_vector(alloc, h, params)[rows]
    return means + rng.generator.standard_normal((n, rows.size))


def sample(
    channel: Channel,
    alloc: TimeAllocation,
    h: Hypothesis,
    params: ModelParams,
    rng: SeededRng,
) -> np.ndarray:
    """Draw one 15-component observation conditioned on h."""
    return sample_batch(channel, alloc, h, params, 1, rng)[0]


def _check_counts(y: np.ndarray) -> None:
    if not np.issubdtype(y.dtype, np.integer) and not np.all(np.floor(y) == y):
        raise ValueError("Poisson observations must be integer-valued")


def log_likelihood(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    h: Hypothesis,
    params: ModelParams,
) -> float:
    """Natural-log density/mass of one full observation under hypothesis h.

    Poisson terms are evaluated in log space as y*log(rate) - rate - logGamma(y+1)
    with the rate-0 convention: log pmf = 0 if y = 0, else -inf.
    """
    y = np.asarray(y)
    if y.shape != (N_ROWS,):
        raise ValueError(f"expected a {N_ROWS}-vector observation, got shape {y.shape}")
    if channel is Channel.POISSON:
        _check_counts(y)
        yf = y.astype(float)
        rate = poisson_rate_vector(alloc, h, params)
        active = rate > 0.0
        terms = np.where(
            active,
            yf * np.log(np.where(active, rate, 1.0)) - rate - gammaln(yf + 1.0),
            np.where(yf == 0.0, 0.0, -np.inf),
        )
        if np.any(yf < 0.0):
            return -math.inf
        return float(terms.sum())
    mean = gaussian_mean_vector(alloc, h, params)
    resid = np.asarray(y, dtype=float) - mean
    return float(-0.5 * resid @ resid - 0.5 * N_ROWS * LOG_2PI)


def log_likelihood_matrix(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    params: ModelParams,
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """Log-likelihood of a batch of observations under all 16 hypotheses.

    y has shape (n, k) where k = len(rows); returns shape (n, 16).  This is
    the hot path shared by the entropy estimator and the MAP detector.
    """
    rows = _resolve_rows(rows)
    y = np.atleast_2d(np.asarray(y))
    if y.shape[1] != rows.size:
        raise ValueError(f"observation width {y.shape[1]} != selected rows {rows.size}")
    if channel is Channel.POISSON:
        _check_counts(y)
        yf = y.astype(float)
        rates = poisson_rate_matrix(alloc, params)[:, rows]
        logr = np.where(rates > 0.0, np.log(np.where(rates > 0.0, rates, 1.0)), 0.0)
        ll = yf @ logr.T - rates.sum(axis=1) - gammaln(yf + 1.0).sum(axis=1, keepdims=True)
        # Rows with zero rate carry all mass at 0: any positive count kills
        # that hypothesis.
        for i in np.flatnonzero((rates == 0.0).any(axis=1)):
            zero = rates[i] == 0.0
            ll[(yf[:, zero] > 0.0).any(axis=1), i] = -np.inf
        return ll
    yf = np.asarray(y, dtype=float)
    means = gaussian_mean_matrix(alloc, params)[:, rows]
    yy = (yf * yf).sum(axis=1)
    mm = (means * means).sum(axis=1)
    sq = yy[:, None] - 2.0 * (yf @ means.T) + mm[None, :]
    return -0.5 * sq - 0.5 * rows.size * LOG_2PI


def log_mixture_batch(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    params: ModelParams,
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """Log of the prior-weighted 16-component mixture density at each observation.

    Computed by log-sum-exp, so it never returns NaN for finite inputs and
    is -inf only when every component has zero mass.
    """
    ll = log_likelihood_matrix(channel, y, alloc, params, rows=rows)
    return logsumexp(ll + log_priors(params)[None, :], axis=1)


def log_mixture(
    channel: Channel,
    y: np.ndarray,
    alloc: TimeAllocation,
    params: ModelParams,
) -> float:
    """Scalar form of log_mixture_batch for one full 15-component observation."""
    y = np.asarray(y)
    if y.shape != (N_ROWS,):
        raise ValueError(f"expected a {N_ROWS}-vector observation, got shape {y.shape}")
    return float(log_mixture_batch(channel, y[None, :], alloc, params)[0])
