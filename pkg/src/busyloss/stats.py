"""Estimation and hypothesis checks used by the verification suite."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError

#: Default one-sided band for empirical stochastic-dominance checks,
#: calibrated to the two-sample Kolmogorov-Smirnov 99% critical band at
#: 1e5 samples per side (with headroom).  Scale by sqrt(1e5 / n) for
#: other sample sizes.
DEFAULT_DOMINANCE_TOLERANCE = 0.02


@dataclass(frozen=True)
class Estimate:
    """Sample mean with a normal-approximation confidence interval."""

    mean: float
    variance: float
    half_width: float
    confidence: float
    count: int

    @property
    def std_error(self) -> float:
        return (self.variance / self.count) ** 0.5


@dataclass(frozen=True)
class DominanceVerdict:
    """Outcome of a one-sided empirical CDF comparison.

    ``max_violation`` is the largest amount by which the supposedly dominated
    CDF exceeds the dominating one, minus the tolerance; the check holds iff
    it is <= 0.
    """

    holds: bool
    max_violation: float
    tolerance: float


def mean_ci(samples: Sequence[float], confidence: float = 0.99) -> Estimate:
    """Sample mean, unbiased variance, and normal-approximation half-width."""
    data = np.asarray(samples, dtype=float)
    n = data.size
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    if not (0.0 < confidence < 1.0):
        raise InsufficientDataError(f"confidence must lie in (0,1), got {confidence}")
    m = float(data.mean())
    var = float(data.var(ddof=1))
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    return Estimate(
        mean=m,
        variance=var,
        half_width=z * (var / n) ** 0.5,
        confidence=confidence,
        count=n,
    )


def consistent_across(estimates: Sequence[Estimate]) -> bool:
    """True iff every pair of estimates has overlapping intervals.

    The overlap criterion: |mean_i - mean_j| must not exceed the
    root-sum-square of the two half-widths.
    """
    if len(estimates) < 2:
        raise InsufficientDataError("need at least 2 estimates to compare")
    for i in range(len(estimates)):
        for j in range(i + 1, len(estimates)):
            a, b = estimates[i], estimates[j]
            gap = abs(a.mean - b.mean)
            if gap > (a.half_width**2 + b.half_width**2) ** 0.5:
                return False
    return True


def stochastic_dominance(
    upper: Sequence[float],
    lower: Sequence[float],
    tolerance: float = DEFAULT_DOMINANCE_TOLERANCE,
) -> DominanceVerdict:
    """Check ``upper >= lower`` in the stochastic order, up to ``tolerance``.

    Both empirical CDFs are evaluated on the merged support; dominance holds
    iff F_upper(x) <= F_lower(x) + tolerance at every merged point.
    """
    up = np.sort(np.asarray(upper, dtype=float))
    lo = np.sort(np.asarray(lower, dtype=float))
    if up.size == 0 or lo.size == 0:
        raise InsufficientDataError("dominance check needs nonempty samples on both sides")
    if tolerance < 0.0:
        raise InsufficientDataError(f"tolerance must be nonnegative, got {tolerance}")
    grid = np.union1d(up, lo)
    f_up = np.searchsorted(up, grid, side="right") / up.size
    f_lo = np.searchsorted(lo, grid, side="right") / lo.size
    max_violation = float(np.max(f_up - f_lo)) - tolerance
    return DominanceVerdict(
        holds=max_violation <= 0.0,
        max_violation=max_violation,
        tolerance=tolerance,
    )


def ks_distance(samples: Sequence[float], cdf) -> float:
    """Kolmogorov distance between an empirical CDF and a continuous CDF."""
    data = np.sort(np.asarray(samples, dtype=float))
    n = data.size
    if n == 0:
        raise InsufficientDataError("empty sample")
    theo = np.asarray([cdf(x) for x in data], dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - theo)
    lower = np.max(theo - np.arange(0, n) / n)
    return float(max(upper, lower))
