"""Order statistics, the empirical mean excess function and ME plots.

Order statistics are 1-indexed from the top: ``X_(1) >= X_(2) >= ... >= X_(n)``.
All plot constructions keep the order-statistic index of each point so the
bands can scale offsets per point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadTruncation,
    BadXi,
    DegenerateNormalizer,
    InfiniteMean,
    NoExceedance,
    NonFiniteValue,
    NonpositiveNormalizer,
    OutOfSupport,
    TooFewPoints,
)

__all__ = [
    "PlotCase",
    "SortedSample",
    "MEPoint",
    "ScaledMEPlot",
    "ReferenceLine",
    "sort_descending",
    "empirical_me",
    "me_plot_raw",
    "scaled_plot_frechet",
    "scaled_plot_gumbel",
    "scaled_plot_weibull",
    "scaled_plot",
    "reference_line",
    "gpd_me",
]


class PlotCase(str, enum.Enum):
    FRECHET = "Frechet"
    GUMBEL = "Gumbel"
    WEIBULL = "Weibull"


class MEPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class SortedSample:
    """Descending order statistics of a finite univariate sample."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise TooFewPoints(f"need at least 3 observations, got {v.size}")
        if np.any(np.diff(v) > 0):
            raise ValueError("values must be non-increasing; use sort_descending()")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def order_stat(self, i: int) -> float:
        """``X_(i)`` with 1-based indexing."""
        if not 1 <= i <= self.n:
            raise IndexError(f"order statistic {i} outside 1..{self.n}")
        return float(self.values[i - 1])

    def affine(self, a: float, b: float = 0.0) -> "SortedSample":
        if not a > 0:
            raise ValueError("scale must be positive to preserve ordering")
        return SortedSample(a * self.values + b)

    def __len__(self) -> int:
        return self.n

    # Strict-exceedance cumulative sums, shared by every plot builder.
    def _exceedance_stats(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_exc")
        if cached is None:
            v = self.values
            # number of entries strictly greater than v[j]: position of the
            # first entry equal to v[j] in the descending array
            count = np.searchsorted(-v, -v, side="left")
            prefix = np.concatenate(([0.0], np.cumsum(v)))
            cached = (count, prefix[count])
            object.__setattr__(self, "_exc", cached)
        return cached

    def me_at_order_stats(self) -> np.ndarray:
        """``M_hat(X_(i))`` for every i (NaN where there is no exceedance)."""
        count, total = self._exceedance_stats()
        out = np.full(self.n, np.nan)
        ok = count > 0
        out[ok] = total[ok] / count[ok] - self.values[ok]
        return out


def sort_descending(sample: Sequence[float] | np.ndarray) -> SortedSample:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 3:
        raise TooFewPoints(f"need at least 3 observations, got {x.size}")
    bad = ~np.isfinite(x)
    if bad.any():
        raise NonFiniteValue(f"non-finite value at position {int(np.argmax(bad))}")
    # stable sort on the negated values keeps ties in input order
    return SortedSample(-np.sort(-x, kind="stable"))


def empirical_me(s: SortedSample, u: float) -> float:
    """Average of ``X_i - u`` over the observations strictly above ``u``."""
    exceed = s.values[s.values > u]
    if exceed.size == 0:
        raise NoExceedance(f"no observation exceeds u={u}")
    return float(np.mean(exceed - u))


def me_plot_raw(s: SortedSample) -> list[MEPoint]:
    me = s.me_at_order_stats()
    return [MEPoint(float(s.values[j]), float(me[j])) for j in range(1, s.n) if not np.isnan(me[j])]


@dataclass(frozen=True, eq=False)
class ScaledMEPlot:
    """A case-normalized ME plot over order statistics ``i = i_start..k``.

    ``index`` holds the 1-based order-statistic index of each point; points
    whose threshold ties with the sample maximum are dropped.
    """

    case: PlotCase
    x: np.ndarray
    y: np.ndarray
    index: np.ndarray
    k: int
    epsilon: float | None
    normalizers: dict = field(default_factory=dict)

    @property
    def points(self) -> list[MEPoint]:
        return [MEPoint(float(a), float(b)) for a, b in zip(self.x, self.y)]

    def __len__(self) -> int:
        return int(self.x.size)


def _check_k(s: SortedSample, k: int) -> None:
    if not (2 <= k < s.n):
        raise BadTruncation(f"k must satisfy 2 <= k < n={s.n}, got {k}")


def _first_index(k: int, eps: float) -> int:
    if not 0 < eps < 1:
        raise BadTruncation(f"eps must lie in (0, 1), got {eps}")
    # guard against k*eps landing a hair above an integer
    i0 = math.ceil(round(k * eps, 9))
    if i0 < 2:
        raise BadTruncation(f"ceil(k*eps) = {i0} < 2; increase k or eps")
    return i0


def _build(s: SortedSample, case: PlotCase, k: int, eps, i0: int, shift: float, scale: float, norms: dict):
    idx = np.arange(i0, k + 1)
    xs = s.values[idx - 1]
    me = s.me_at_order_stats()[idx - 1]
    keep = ~np.isnan(me)
    idx, xs, me = idx[keep], xs[keep], me[keep]
    return ScaledMEPlot(
        case=case,
        x=(xs - shift) / scale,
        y=me / scale,
        index=idx,
        k=k,
        epsilon=eps,
        normalizers=norms,
    )


def scaled_plot_frechet(s: SortedSample, k: int, eps: float) -> ScaledMEPlot:
    _check_k(s, k)
    i0 = _first_index(k, eps)
    xk = s.order_stat(k)
    if xk <= 0:
        raise NonpositiveNormalizer(f"X_(k) = {xk} must be positive for the Frechet scaling")
    norms = {"X_k": xk, "X_1": s.order_stat(1)}
    return _build(s, PlotCase.FRECHET, k, eps, i0, 0.0, xk, norms)


def gumbel_anchor(k: int) -> int:
    """Index ``ceil(k/e)`` of the Gumbel scale normalizer."""
    return math.ceil(k / math.e)


def scaled_plot_gumbel(s: SortedSample, k: int, eps: float) -> ScaledMEPlot:
    _check_k(s, k)
    i0 = _first_index(k, eps)
    xk = s.order_stat(k)
    xa = s.order_stat(gumbel_anchor(k))
    if not xa > xk:
        raise DegenerateNormalizer(f"X_(ceil(k/e)) == X_(k) == {xk}")
    norms = {"X_k": xk, "X_k_over_e": xa, "X_1": s.order_stat(1)}
    return _build(s, PlotCase.GUMBEL, k, eps, i0, xk, xa - xk, norms)


def scaled_plot_weibull(s: SortedSample, k: int, eps: float | None = None) -> ScaledMEPlot:
    """Weibull-scaled plot; ``eps=None`` keeps every index ``2..k``."""
    _check_k(s, k)
    i0 = 2 if eps is None else _first_index(k, eps)
    xk = s.order_stat(k)
    x1 = s.order_stat(1)
    if not x1 > xk:
        raise DegenerateNormalizer(f"X_(1) == X_(k) == {xk}")
    norms = {"X_k": xk, "X_1": x1}
    return _build(s, PlotCase.WEIBULL, k, eps, i0, xk, x1 - xk, norms)


def scaled_plot(s: SortedSample, case: PlotCase | str, k: int, eps: float) -> ScaledMEPlot:
    case = PlotCase(case)
    if case is PlotCase.FRECHET:
        return scaled_plot_frechet(s, k, eps)
    if case is PlotCase.GUMBEL:
        return scaled_plot_gumbel(s, k, eps)
    return scaled_plot_weibull(s, k, eps)


@dataclass(frozen=True)
class ReferenceLine:
    """Segment ``y = slope * x + intercept`` for ``x_start <= x <= x_end``."""

    case: PlotCase
    xi: float
    x_start: float
    x_end: float
    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    @property
    def segment(self) -> tuple[float, float, float, float]:
        return (self.x_start, self.x_end, self.slope, self.intercept)


def reference_line(case: PlotCase | str, xi: float, eps: float) -> ReferenceLine:
    case = PlotCase(case)
    if not 0 < eps < 1:
        raise BadTruncation(f"eps must lie in (0, 1), got {eps}")
    if case is PlotCase.GUMBEL:
        return ReferenceLine(case, 0.0, 0.0, -math.log(eps), 0.0, 1.0)
    if case is PlotCase.FRECHET:
        if not 0 < xi < 1:
            raise BadXi(f"Frechet reference line needs 0 < xi < 1, got {xi}")
        return ReferenceLine(case, xi, 1.0, 1.0 / eps, xi / (1 - xi), 0.0)
    if not xi < 0:
        raise BadXi(f"Weibull reference line needs xi < 0, got {xi}")
    # y = (xi/(1-xi)) (x - 1): positive at x = 0, zero at the right endpoint
    slope = xi / (1 - xi)
    return ReferenceLine(case, xi, 0.0, 1.0 - eps ** (-xi), slope, -slope)


def gpd_me(xi: float, beta: float, u: float) -> float:
    """Mean excess function of GPD(xi, beta) at threshold ``u``."""
    if xi >= 1:
        raise InfiniteMean(f"GPD mean is infinite for xi={xi} >= 1")
    if not beta > 0:
        raise OutOfSupport(f"scale beta must be positive, got {beta}")
    if u < 0 or (xi < 0 and u > -beta / xi):
        raise OutOfSupport(f"u={u} outside the GPD support")
    return beta / (1 - xi) + xi / (1 - xi) * u
