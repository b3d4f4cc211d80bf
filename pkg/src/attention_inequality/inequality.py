"""Concentration and burstiness metrics for samples of nonnegative values.

All functions are pure and accept anything :func:`numpy.asarray` understands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    BadBase,
    DegenerateSeries,
    EmptySample,
    FractionOutOfRange,
    NegativeValue,
    TooShort,
    ZeroMean,
)

DEFAULT_FRACTIONS = (0.01, 0.2)


def _validated(values: ArrayLike) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySample("sample is empty")
    if np.any(np.isnan(x)):
        raise NegativeValue("sample contains NaN")
    if np.any(x < 0):
        raise NegativeValue("sample contains negative values")
    if not np.any(x > 0):
        raise ZeroMean("sample mean is zero; the coefficient is undefined")
    return x


def gini(values: ArrayLike) -> float:
    """Gini coefficient of a nonnegative sample.

    Uses the rank-weighted form ``sum((2i - n - 1) x_(i)) / (n * sum(x))`` over
    the ascending order statistics, which is algebraically identical to the
    mean absolute pairwise difference divided by twice the mean.  A single
    value has Gini 0.

    Raises:
        EmptySample: no values.
        ZeroMean: every value is zero.
    """
    x = np.sort(_validated(values))
    n = x.size
    if n == 1:
        return 0.0
    ranks = 2.0 * np.arange(1, n + 1, dtype=np.float64) - n - 1
    g = float(np.dot(ranks, x) / (n * x.sum()))
    # roundoff can push perfect equality a hair below zero
    return max(g, 0.0)


def gini_pairwise(values: ArrayLike) -> float:
    """Reference O(N^2) Gini: sum over all ordered pairs of |x_i - x_j| / (2 N^2 mean)."""
    x = _validated(values)
    n = x.size
    total = 0.0
    for xi in x:
        total += float(np.abs(xi - x).sum())
    return total / (2.0 * n * n * x.mean())


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative value share against cumulative population share.

    ``pop_frac[0] == value_frac[0] == 0`` and both end at 1.
    """

    pop_frac: np.ndarray
    value_frac: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.pop_frac.tolist(), self.value_frac.tolist()))

    def area_gap(self) -> float:
        """Area between the equality diagonal and the curve (trapezoid rule, exact here)."""
        under = float(np.sum(np.diff(self.pop_frac) * (self.value_frac[1:] + self.value_frac[:-1])) / 2.0)
        return 0.5 - under

    def __len__(self) -> int:
        return self.pop_frac.size


def lorenz(values: ArrayLike) -> LorenzCurve:
    x = np.sort(_validated(values), kind="stable")
    n = x.size
    cum = np.concatenate(([0.0], np.cumsum(x)))
    value_frac = cum / cum[-1]
    value_frac[-1] = 1.0
    pop_frac = np.arange(n + 1, dtype=np.float64) / n
    return LorenzCurve(pop_frac=pop_frac, value_frac=value_frac)


def top_share(values: ArrayLike, fraction: float) -> float:
    """Share of the total held by the ``ceil(fraction * N)`` largest values."""
    if not 0.0 < fraction < 1.0:
        raise FractionOutOfRange(f"fraction must lie in (0, 1), got {fraction!r}")
    x = _validated(values)
    # guard against 0.07 * 100 == 7.000000000000001
    k = max(1, math.ceil(fraction * x.size - 1e-9))
    top = np.partition(x, x.size - k)[x.size - k:]
    return float(top.sum() / x.sum())


def kurtosis_burstiness(counts: ArrayLike) -> float:
    """Kurtosis ``m4 / m2**2`` of a per-period activity series.

    Population (biased) central moments are used, so a Gaussian series scores
    about 3 and the value is invariant under affine maps ``a + b*x``.

    Raises:
        TooShort: fewer than two periods.
        DegenerateSeries: all periods have the same count.
    """
    x = np.asarray(counts, dtype=np.float64).ravel()
    if x.size < 2:
        raise TooShort("kurtosis needs at least two periods")
    if np.ptp(x) == 0:
        raise DegenerateSeries("series has zero variance")
    d = x - x.mean()
    d2 = d * d
    m2 = d2.mean()
    m4 = (d2 * d2).mean()
    return float(m4 / (m2 * m2))


class LogBin(NamedTuple):
    bin_lo: float
    bin_hi: float
    count: int
    density: float


def log_bin(values: ArrayLike, base: float = 2.0) -> list[LogBin]:
    """Histogram on geometric bins ``[base**k, base**(k+1))``.

    Bins start at ``base**0 = 1`` unless smaller positive values are present,
    in which case the grid extends downward by whole powers of ``base``.
    Zeros go to a leading ``(0, 0)`` bin whose density is the plain fraction
    of zeros.  Other densities are ``count / (N * width)``.
    """
    if not (base > 1.0 and math.isfinite(base)):
        raise BadBase(f"base must be a finite number > 1, got {base!r}")
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return []
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise NegativeValue("log_bin needs nonnegative values")
    n = x.size
    out: list[LogBin] = []
    n_zero = int(np.count_nonzero(x == 0))
    if n_zero:
        out.append(LogBin(0.0, 0.0, n_zero, n_zero / n))
    pos = x[x > 0]
    if pos.size == 0:
        return out
    lb = math.log(base)
    k_lo = min(0, math.floor(math.log(pos.min()) / lb) - 1)
    k_hi = math.floor(math.log(pos.max()) / lb) + 2
    edges = base ** np.arange(k_lo, k_hi + 1, dtype=np.float64)
    idx = np.searchsorted(edges, pos, side="right") - 1
    counts = np.bincount(idx, minlength=edges.size - 1)[: edges.size - 1]
    first = 0 if k_lo == 0 else int(np.flatnonzero(counts)[0])
    last = int(np.flatnonzero(counts)[-1])
    for i in range(first, last + 1):
        lo, hi = float(edges[i]), float(edges[i + 1])
        c = int(counts[i])
        out.append(LogBin(lo, hi, c, c / (n * (hi - lo))))
    return out


@dataclass(frozen=True)
class InequalityReport:
    gini: float
    lorenz: LorenzCurve
    top_shares: dict[float, float] = field(default_factory=dict)
    n: int = 0


def inequality_report(values: ArrayLike, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> InequalityReport:
    x = _validated(values)
    return InequalityReport(
        gini=gini(x),
        lorenz=lorenz(x),
        top_shares={float(f): top_share(x, f) for f in fractions},
        n=int(x.size),
    )
