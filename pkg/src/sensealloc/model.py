"""Input model: four binary-intensity targets observed through sum combinations.

A hidden 4-vector of intensities (each independently lambda1 with probability
p, else lambda0) can be observed through 15 derived measurements: the four
individual targets, the six pairwise sums, the four triple sums, and the
single all-targets sum.  Each measurement row is assigned a nonnegative dwell
time; the 15 times are the experiment's decision variable.  This module holds
the distribution over the 16 input realizations, the fixed 15x4 incidence
pattern, and the per-realization Poisson rate / Gaussian mean vectors that
the two observation channels share.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

N_TARGETS = 4
N_ROWS = 15
N_HYPOTHESES = 16

# Row groups in the frozen observation order: singlets, pairs, triplets, all-targets.
SINGLET_ROWS = slice(0, 4)
PAIR_ROWS = slice(4, 10)
TRIPLET_ROWS = slice(10, 14)
QUAD_ROW = 14


def _build_incidence() -> np.ndarray:
    rows = []
    for size in (1, 2, 3, 4):
        for combo in itertools.combinations(range(N_TARGETS), size):
            row = np.zeros(N_TARGETS)
            row[list(combo)] = 1.0
            rows.append(row)
    a = np.array(rows)
    a.setflags(write=False)
    return a


#: 15x4 binary matrix; row i selects the targets summed into observation i.
#: Row order is frozen (4 singlets, 6 pairs, 4 triplets, all-targets) and
#: every module indexes observations by it.
INCIDENCE = _build_incidence()


@dataclass(frozen=True)
class ModelParams:
    """Shared input-distribution parameters for both channels.

    p is the per-target probability of the high intensity level lambda1;
    lambda0 is the low level.  Requires 0 <= p <= 1 and 0 <= lambda0 < lambda1.
    """

    p: float
    lambda0: float
    lambda1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.lambda0 < self.lambda1:
            raise ValueError(
                f"need 0 <= lambda0 < lambda1, got {self.lambda0}, {self.lambda1}"
            )


@dataclass(frozen=True)
class Hypothesis:
    """One of the 16 realizations of the hidden 4-vector.

    bits[k] == 1 means target k sits at lambda1.  The index is the
    little-endian encoding of bits (index = sum bits[k] * 2**k), so index 0
    is all-low and index 15 all-high.
    """

    index: int
    bits: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if self.index != sum(b << k for k, b in enumerate(self.bits)):
            raise ValueError(f"index {self.index} does not encode bits {self.bits}")

    @classmethod
    def from_index(cls, index: int) -> Hypothesis:
        if not 0 <= index < N_HYPOTHESES:
            raise ValueError(f"hypothesis index must be in 0..15, got {index}")
        bits = tuple((index >> k) & 1 for k in range(N_TARGETS))
        return cls(index, bits)


_HYPOTHESES = tuple(Hypothesis.from_index(i) for i in range(N_HYPOTHESES))


@dataclass(frozen=True)
class TimeAllocation:
    """Nonnegative dwell times for the 15 observation rows."""

    times: tuple[float, ...]

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        if len(times) != N_ROWS:
            raise ValueError(f"expected {N_ROWS} times, got {len(times)}")
        for i, t in enumerate(times):
            if not np.isfinite(t) or t < 0.0:
                raise ValueError(f"time {i + 1} must be finite and >= 0, got {t}")
        object.__setattr__(self, "times", times)

    @classmethod
    def zeros(cls) -> TimeAllocation:
        return cls((0.0,) * N_ROWS)

    @classmethod
    def from_group_times(cls, a: float, b: float, c: float, d: float) -> TimeAllocation:
        """Allocation constant within each structural group: singlet rows get a,
        pair rows b, triplet rows c, the all-targets row d."""
        return cls((a,) * 4 + (b,) * 6 + (c,) * 4 + (d,))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.times)

    @property
    def total(self) -> float:
        return float(sum(self.times))

    def active_rows(self) -> np.ndarray:
        """Indices of rows with strictly positive dwell time."""
        return np.flatnonzero(self.array > 0.0)


def enumerate_hypotheses() -> list[Hypothesis]:
    """All 16 hypotheses in index order."""
    return list(_HYPOTHESES)


def hypothesis_prior(h: Hypothesis, params: ModelParams) -> float:
    """Prior probability p^k (1-p)^(4-k) where k counts high-level targets."""
    k = sum(h.bits)
    return params.p**k * (1.0 - params.p) ** (N_TARGETS - k)


def priors_vector(params: ModelParams) -> np.ndarray:
    """Priors of all 16 hypotheses, in index order."""
    return np.array([hypothesis_prior(h, params) for h in _HYPOTHESES])


def input_levels(h: Hypothesis, params: ModelParams) -> np.ndarray:
    """Intensity 4-vector under h: lambda1 where the bit is set, else lambda0."""
    return np.where(np.array(h.bits, dtype=bool), params.lambda1, params.lambda0)


def levels_matrix(params: ModelParams) -> np.ndarray:
    """16x4 matrix of input levels, one hypothesis per row."""
    return np.array([input_levels(h, params) for h in _HYPOTHESES])


def poisson_rate_vector(
    alloc: TimeAllocation, h: Hypothesis, params: ModelParams
) -> np.ndarray:
    """Poisson rate of each observation row: dwell time x summed intensity."""
    return alloc.array * (INCIDENCE @ input_levels(h, params))


def gaussian_mean_vector(
    alloc: TimeAllocation, h: Hypothesis, params: ModelParams
) -> np.ndarray:
    """Gaussian mean of each row: sqrt(dwell time) x summed intensity.

    Noise covariance is the identity by model definition.
    """
    return np.sqrt(alloc.array) * (INCIDENCE @ input_levels(h, params))


def poisson_rate_matrix(alloc: TimeAllocation, params: ModelParams) -> np.ndarray:
    """16x15 matrix of Poisson rates, one hypothesis per row."""
    return (levels_matrix(params) @ INCIDENCE.T) * alloc.array


def gaussian_mean_matrix(alloc: TimeAllocation, params: ModelParams) -> np.ndarray:
    """16x15 matrix of Gaussian means, one hypothesis per row."""
    return (levels_matrix(params) @ INCIDENCE.T) * np.sqrt(alloc.array)
