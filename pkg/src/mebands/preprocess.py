"""Daily time-series preparation: imputation, deseasonalization, AR(p) residuals.

Calendar days are grouped by ``(month, day)`` with Feb 29 folded into Feb 28.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_toeplitz

from .errors import DegenerateSeries, InsufficientYears, MissingValues, UnimputableDay, ZeroDayVariance

log = logging.getLogger(__name__)


def day_key(d: dt.date) -> tuple[int, int]:
    if d.month == 2 and d.day == 29:
        return (2, 28)
    return (d.month, d.day)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    timestamps: tuple[dt.date, ...]
    values: np.ndarray
    missing: frozenset = frozenset()

    def __post_init__(self):
        ts = tuple(self.timestamps)
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size != len(ts):
            raise ValueError(f"{len(ts)} timestamps but {v.size} values")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        miss = frozenset(int(i) for i in self.missing)
        if any(not 0 <= i < v.size for i in miss):
            raise ValueError("missing indices out of range")
        v.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "missing", miss)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def from_observations(cls, dates: Sequence[dt.date], values: Sequence[float | None], fill_calendar: bool = True):
        """Build a series, marking ``None``/NaN values and absent dates as missing."""
        obs = {}
        for d, v in zip(dates, values):
            if d in obs:
                raise ValueError(f"duplicate date {d.isoformat()}")
            obs[d] = v
        if not obs:
            raise ValueError("empty series")
        if fill_calendar:
            first, last = min(obs), max(obs)
            days = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
        else:
            days = sorted(obs)
        vals = np.empty(len(days))
        miss = set()
        for i, d in enumerate(days):
            v = obs.get(d)
            if v is None or not math.isfinite(v):
                vals[i] = np.nan
                miss.add(i)
            else:
                vals[i] = v
        return cls(tuple(days), vals, frozenset(miss))

    def groups(self) -> dict[tuple[int, int], list[int]]:
        out = defaultdict(list)
        for i, d in enumerate(self.timestamps):
            out[day_key(d)].append(i)
        return out


def impute_daily_mean(ts: TimeSeries) -> TimeSeries:
    """Fill each missing value with the mean of the same calendar day in other years."""
    if not ts.missing:
        return ts
    vals = ts.values.copy()
    groups = ts.groups()
    for i in sorted(ts.missing):
        d = ts.timestamps[i]
        donors = [
            j for j in groups[day_key(d)] if j not in ts.missing and ts.timestamps[j].year != d.year
        ]
        if not donors:
            raise UnimputableDay(f"no other year observes {d.strftime('%b-%d')} (needed for {d.isoformat()})")
        vals[i] = float(np.mean(ts.values[donors]))
    return TimeSeries(ts.timestamps, vals, frozenset())


@dataclass(frozen=True)
class SeasonalScale:
    """Per calendar-day standard deviations used for deseasonalization."""

    std: dict

    def apply(self, ts: TimeSeries) -> TimeSeries:
        scale = np.array([self.std[day_key(d)] for d in ts.timestamps])
        return TimeSeries(ts.timestamps, ts.values / scale, frozenset())


def seasonal_scale(ts: TimeSeries) -> SeasonalScale:
    if ts.missing:
        raise MissingValues(f"{len(ts.missing)} missing values; impute first")
    std = {}
    for key, idx in ts.groups().items():
        if len(idx) < 2:
            raise InsufficientYears(f"calendar day {key[0]:02d}-{key[1]:02d} has {len(idx)} observation(s); need 2")
        s = float(np.std(ts.values[idx], ddof=1))
        if not s > 0:
            raise ZeroDayVariance(f"values on calendar day {key[0]:02d}-{key[1]:02d} are constant")
        std[key] = s
    return SeasonalScale(std)


def deseasonalize_daily(ts: TimeSeries) -> TimeSeries:
    """Divide every value by the sample std (ddof=1) of its calendar-day group."""
    return seasonal_scale(ts).apply(ts)


@dataclass(frozen=True)
class ARModel:
    order: int
    coefficients: tuple[float, ...]
    intercept: float
    noise_variance: float
    aic: float
    aic_path: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": list(self.coefficients),
            "intercept": self.intercept,
            "noise_variance": self.noise_variance,
            "aic": self.aic,
        }


def autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (divide by N) sample autocovariances at lags ``0..max_lag``."""
    n = x.size
    xc = x - x.mean()
    return np.array([xc[: n - h] @ xc[h:] / n for h in range(max_lag + 1)])


def fit_ar_aic(values: Sequence[float] | np.ndarray, max_order: int) -> ARModel:
    """Yule-Walker AR fits for ``p = 0..max_order``; keep the lowest ``N ln s2 + 2p``.

    Ties go to the smaller order.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if n <= 2 * max_order or n < 2:
        raise DegenerateSeries(f"length {n} must exceed 2*max_order = {2 * max_order}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSeries("series contains non-finite values")
    r = autocovariance(x, max_order)
    if not r[0] > 0:
        raise DegenerateSeries("series has zero variance")
    mu = float(x.mean())
    best = None
    path = []
    for p in range(max_order + 1):
        phi = solve_toeplitz(r[:p], r[1 : p + 1]) if p else np.zeros(0)
        s2 = float(r[0] - phi @ r[1 : p + 1])
        if not s2 > 0:
            log.info("AR(%d) has non-positive innovation variance; skipped", p)
            path.append(math.inf)
            continue
        aic = n * math.log(s2) + 2 * p
        path.append(aic)
        if best is None or aic < best[0]:
            best = (aic, p, phi, s2)
    if best is None:
        raise DegenerateSeries("no AR order gives a positive innovation variance")
    aic, p, phi, s2 = best
    return ARModel(p, tuple(float(c) for c in phi), mu * (1 - float(phi.sum())), s2, aic, tuple(path))


def residuals(m: ARModel, values: Sequence[float] | np.ndarray) -> np.ndarray:
    """One-step residuals ``x_t - c - sum_j phi_j x_(t-j)`` for ``t = p+1..N``."""
    x = np.asarray(values, dtype=float)
    p = m.order
    if x.size <= p:
        raise ValueError(f"length {x.size} must exceed the AR order {p}")
    fitted = np.full(x.size - p, m.intercept)
    for j, c in enumerate(m.coefficients, start=1):
        fitted += c * x[p - j : x.size - j]
    return x[p:] - fitted


def lag_autocorrelations(x: np.ndarray, lags: Iterable[int] = range(1, 6)) -> np.ndarray:
    lags = list(lags)
    r = autocovariance(np.asarray(x, dtype=float), max(lags))
    return r[lags] / r[0]


@dataclass(frozen=True, eq=False)
class PipelineResult:
    raw: TimeSeries
    imputed: TimeSeries
    deseasonalized: TimeSeries
    scale: SeasonalScale
    model: ARModel
    residuals: np.ndarray

    @property
    def imputed_indices(self) -> list[int]:
        return sorted(self.raw.missing)

    def metadata(self) -> dict:
        return {
            "n_observations": len(self.raw),
            "n_imputed": len(self.raw.missing),
            "imputed_dates": [self.raw.timestamps[i].isoformat() for i in self.imputed_indices],
            "ar_model": self.model.as_dict(),
            "n_residuals": int(self.residuals.size),
            "residual_autocorrelation_lag1_5": [float(v) for v in lag_autocorrelations(self.residuals)],
        }


def run_pipeline(ts: TimeSeries, max_order: int = 40) -> PipelineResult:
    """Impute, deseasonalize, fit AR by AIC and extract residuals."""
    imputed = impute_daily_mean(ts)
    scale = seasonal_scale(imputed)
    des = scale.apply(imputed)
    max_order = min(max_order, (len(des) - 1) // 2)
    model = fit_ar_aic(des.values, max_order)
    return PipelineResult(ts, imputed, des, scale, model, residuals(model, des.values))


__all__ = [
    "TimeSeries",
    "ARModel",
    "SeasonalScale",
    "PipelineResult",
    "day_key",
    "impute_daily_mean",
    "seasonal_scale",
    "deseasonalize_daily",
    "autocovariance",
    "fit_ar_aic",
    "residuals",
    "lag_autocorrelations",
    "run_pipeline",
]
