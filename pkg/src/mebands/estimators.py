"""Hill, Pickands and moment (Dekkers-Einmahl-de Haan) estimators of xi."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadTruncation, DegenerateSpacing, EmptyRange, MEBandsError, NegativeRatio, NonpositiveOrderStat
from .sample import SortedSample

__all__ = ["Method", "XiEstimate", "EstimatorPath", "hill", "pickands", "moment", "estimate", "estimator_path"]


class Method(str, enum.Enum):
    HILL = "Hill"
    PICKANDS = "Pickands"
    MOMENT = "Moment"

    @classmethod
    def parse(cls, name: "str | Method") -> "Method":
        if isinstance(name, Method):
            return name
        for m in cls:
            if m.value.lower() == str(name).lower():
                return m
        raise ValueError(f"unknown estimator {name!r}; valid: {', '.join(m.value for m in cls)}")


@dataclass(frozen=True)
class XiEstimate:
    method: Method
    k: int
    value: float


@dataclass(frozen=True)
class EstimatorPath:
    method: Method
    ks: np.ndarray
    values: np.ndarray
    skipped: list = field(default_factory=list)

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(int(k), float(v)) for k, v in zip(self.ks, self.values)]


def _log_excesses(s: SortedSample, k: int) -> np.ndarray:
    if not 2 <= k < s.n:
        raise BadTruncation(f"k must satisfy 2 <= k < n={s.n}, got {k}")
    ref = s.values[k]  # X_(k+1)
    if not ref > 0:
        raise NonpositiveOrderStat(f"X_(k+1) = {ref} must be positive")
    return np.log(s.values[:k]) - math.log(ref)


def hill(s: SortedSample, k: int) -> XiEstimate:
    return XiEstimate(Method.HILL, k, float(np.mean(_log_excesses(s, k))))


def pickands(s: SortedSample, k: int) -> XiEstimate:
    if k < 1 or 4 * k > s.n:
        raise BadTruncation(f"Pickands needs 1 <= k and 4k <= n={s.n}, got k={k}")
    x1, x2, x4 = s.order_stat(k), s.order_stat(2 * k), s.order_stat(4 * k)
    den = x2 - x4
    if den == 0:
        raise DegenerateSpacing(f"X_(2k) == X_(4k) == {x2}")
    ratio = (x1 - x2) / den
    if not ratio > 0:
        raise NegativeRatio(f"spacing ratio {ratio} is not positive")
    return XiEstimate(Method.PICKANDS, k, math.log(ratio) / math.log(2))


def moment(s: SortedSample, k: int) -> XiEstimate:
    logs = _log_excesses(s, k)
    h1 = float(np.mean(logs))
    h2 = float(np.mean(logs * logs))
    if h2 == 0:
        raise DegenerateSpacing("second log-moment is zero")
    value = h1 + 1 - 0.5 / (1 - h1 * h1 / h2)
    return XiEstimate(Method.MOMENT, k, value)


_ESTIMATORS = {Method.HILL: hill, Method.PICKANDS: pickands, Method.MOMENT: moment}


def estimate(s: SortedSample, method: Method | str, k: int) -> XiEstimate:
    return _ESTIMATORS[Method.parse(method)](s, k)


def estimator_path(s: SortedSample, method: Method | str, k_min: int, k_max: int, step: int = 1) -> EstimatorPath:
    """Single-k estimates over ``k_min, k_min + step, ..., <= k_max``.

    Values of k that violate the estimator's preconditions are skipped and
    listed in ``skipped`` as ``(k, error kind)``.
    """
    method = Method.parse(method)
    if k_max < k_min or step < 1:
        raise EmptyRange(f"empty k range {k_min}..{k_max} step {step}")
    fn = _ESTIMATORS[method]
    ks, vals, skipped = [], [], []
    for k in range(k_min, k_max + 1, step):
        try:
            est = fn(s, k)
        except MEBandsError as exc:
            skipped.append((k, exc.kind))
            continue
        ks.append(k)
        vals.append(est.value)
    if not ks:
        raise EmptyRange(f"no admissible k in {k_min}..{k_max} for {method.value}")
    return EstimatorPath(method, np.asarray(ks), np.asarray(vals), skipped)
