"""Seedable random generation and the limit-set supremum functionals.

Random streams
--------------
A :class:`Seed` is a ``(root, stream)`` pair of unsigned 64-bit integers.  It maps
onto numpy's ``SeedSequence(entropy=root, spawn_key=(stream, *subkeys))`` feeding
a PCG64 bit generator, so any sub-stream is addressable directly without
spawning its siblings first.  Monte-Carlo code uses ``seed.generator(0, r)`` for
replicate ``r``; results do not depend on the order replicates are evaluated in.

Functionals
-----------
``sup_functional`` evaluates, on a discretized Brownian bridge ``B``, the suprema
over grid points ``t in [eps, 1]`` of

=========  ==========================================  ================================================
case       X side                                      Y side
=========  ==========================================  ================================================
Frechet    ``xi t^-(1+xi) B(t)``                       ``xi t^-1 int_0^t y^-(1+xi) B(y) dy``
Weibull    same as Frechet with ``xi < 0``             same as Frechet with ``xi < 0``
Gumbel     ``e B(1/e) ln t + B(t)/t``                  ``e B(1/e) + t^-1 int_0^t B(y)/y dy``
=========  ==========================================  ================================================

The singular integrals default to product integration: the weight
``y^-(1+xi)`` is integrated exactly against the piecewise-linear interpolant of
the path.  ``quadrature="trapezoid"`` gives the composite trapezoid rule with a
zero contribution from ``y = 0``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import BadParam, BadXi, GridTooCoarse
from .sample import PlotCase

__all__ = [
    "Seed",
    "GENERATOR_ID",
    "Family",
    "sample_gpd",
    "sample_family",
    "family_tail",
    "BridgePath",
    "brownian_bridge_path",
    "bridge_block",
    "refine_bridge",
    "StableParams",
    "sample_stable",
    "Side",
    "sup_functional",
    "functional_suprema",
    "singular_integral",
]

_U64 = 2**64

GENERATOR_ID = f"numpy-{np.__version__}/PCG64/SeedSequence(root, spawn_key=(stream, ...))"


@dataclass(frozen=True)
class Seed:
    root: int
    stream: int = 0

    def __post_init__(self):
        for name in ("root", "stream"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and 0 <= int(v) < _U64):
                raise BadParam(f"seed {name} must be an unsigned 64-bit integer, got {v!r}")

    def sequence(self, *subkeys: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.root), spawn_key=(int(self.stream), *map(int, subkeys)))

    def generator(self, *subkeys: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(*subkeys)))

    def as_dict(self) -> dict:
        return {"root": int(self.root), "stream": int(self.stream)}

    @classmethod
    def coerce(cls, seed: "Seed | int | Mapping") -> "Seed":
        if isinstance(seed, Seed):
            return seed
        if isinstance(seed, Mapping):
            return cls(int(seed["root"]), int(seed.get("stream", 0)))
        return cls(int(seed))


# ---------------------------------------------------------------- samplers


def _gpd_quantile(u: np.ndarray, xi: float, beta: float) -> np.ndarray:
    # 1 - u is uniform too; log1p(-u) = log(1 - u)
    lg = np.log1p(-u)
    if xi == 0:
        return -beta * lg
    return beta * np.expm1(-xi * lg) / xi


def sample_gpd(xi: float, beta: float, n: int, seed: Seed) -> np.ndarray:
    """``n`` draws from GPD(xi, beta) by inversion of the distribution function."""
    if not beta > 0:
        raise BadParam(f"GPD scale must be positive, got {beta}")
    if n < 1:
        raise BadParam(f"n must be positive, got {n}")
    return _gpd_quantile(seed.generator().random(n), float(xi), float(beta))


class Family(str, enum.Enum):
    EXPONENTIAL = "Exponential"
    NORMAL = "Normal"
    LOGNORMAL = "Lognormal"
    BETA = "Beta"
    GPD = "GPD"
    PARETO = "Pareto"

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower()
        aliases = {"exp": "exponential", "norm": "normal", "lnorm": "lognormal"}
        key = aliases.get(key, key)
        for f in cls:
            if f.value.lower() == key:
                return f
        raise BadParam(f"unknown family {name!r}; valid: {', '.join(f.value for f in cls)}")


_DEFAULTS = {
    Family.EXPONENTIAL: {"rate": 1.0},
    Family.NORMAL: {"loc": 0.0, "scale": 1.0},
    Family.LOGNORMAL: {"mu": 0.0, "sigma": 1.0},
    Family.BETA: {"a": 2.0, "b": 2.0},
    Family.GPD: {"xi": 0.0, "beta": 1.0},
    Family.PARETO: {"xi": 0.5, "scale": 1.0},
}


_POSITIVE = {
    Family.EXPONENTIAL: ("rate",),
    Family.NORMAL: ("scale",),
    Family.LOGNORMAL: ("sigma",),
    Family.BETA: ("a", "b"),
    Family.GPD: ("beta",),
    Family.PARETO: ("xi", "scale"),
}


def family_params(family: Family | str, params: Mapping[str, float] | None = None) -> dict:
    family = Family.parse(family)
    out = dict(_DEFAULTS[family])
    for key, val in (params or {}).items():
        if key not in out:
            raise BadParam(f"{family.value} takes parameters {sorted(out)}, got {key!r}")
        out[key] = float(val)
    for key in _POSITIVE[family]:
        if not out[key] > 0:
            raise BadParam(f"{family.value} parameter {key} must be positive, got {out[key]}")
    return out


def sample_family(family: Family | str, params: Mapping[str, float] | None, n: int, seed: Seed) -> np.ndarray:
    """Draw ``n`` iid values from one of the simulation families.

    Normal draws use numpy's ziggurat transform of uniforms; Beta uses numpy's
    gamma-ratio method (Johnk's algorithm for small shapes).  GPD and Pareto are
    sampled by inversion.
    """
    family = Family.parse(family)
    p = family_params(family, params)
    if n < 1:
        raise BadParam(f"n must be positive, got {n}")
    rng = seed.generator()
    if family is Family.EXPONENTIAL:
        return rng.standard_exponential(n) / p["rate"]
    if family is Family.NORMAL:
        return p["loc"] + p["scale"] * rng.standard_normal(n)
    if family is Family.LOGNORMAL:
        return np.exp(p["mu"] + p["sigma"] * rng.standard_normal(n))
    if family is Family.BETA:
        return rng.beta(p["a"], p["b"], n)
    if family is Family.GPD:
        return _gpd_quantile(rng.random(n), p["xi"], p["beta"])
    # Pareto: P(X > x) = (x/scale)^(-1/xi), x >= scale
    return p["scale"] * np.exp(-p["xi"] * np.log1p(-rng.random(n)))


def family_tail(family: Family | str, params: Mapping[str, float] | None = None) -> tuple[float, PlotCase]:
    """Extreme value index and domain of attraction of a simulation family."""
    family = Family.parse(family)
    p = family_params(family, params)
    if family in (Family.EXPONENTIAL, Family.NORMAL, Family.LOGNORMAL):
        return 0.0, PlotCase.GUMBEL
    if family is Family.BETA:
        return -1.0 / p["b"], PlotCase.WEIBULL
    xi = p["xi"]
    if xi > 0:
        return xi, PlotCase.FRECHET
    if xi == 0:
        return 0.0, PlotCase.GUMBEL
    return xi, PlotCase.WEIBULL


# ---------------------------------------------------------- Brownian bridge


@dataclass(frozen=True, eq=False)
class BridgePath:
    grid: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return int(self.values.size - 1)


def _check_m(m: int) -> None:
    if m < 16:
        raise BadParam(f"bridge grid needs m >= 16 intervals, got {m}")


def _pin(increments: np.ndarray) -> np.ndarray:
    m = increments.shape[-1]
    walk = np.zeros(increments.shape[:-1] + (m + 1,))
    np.cumsum(increments, axis=-1, out=walk[..., 1:])
    t = np.arange(m + 1) / m
    bridge = walk - t * walk[..., -1:]
    bridge[..., 0] = 0.0
    bridge[..., -1] = 0.0
    return bridge


def brownian_bridge_path(m: int, seed: Seed) -> BridgePath:
    """Discrete bridge: Gaussian walk with variance-1/m steps, pinned at t = 1."""
    _check_m(m)
    incr = seed.generator().standard_normal(m) / math.sqrt(m)
    return BridgePath(np.arange(m + 1) / m, _pin(incr))


def bridge_block(seed: Seed, replicates: Iterable[int], m: int) -> np.ndarray:
    """Paths for the given replicate numbers, one row each.

    Replicate ``r`` always draws from sub-stream ``seed.generator(0, r)``, so a
    block's rows do not depend on the other replicates in it.
    """
    _check_m(m)
    reps = list(replicates)
    incr = np.empty((len(reps), m))
    for row, r in enumerate(reps):
        seed.generator(0, r).standard_normal(out=incr[row])
    incr /= math.sqrt(m)
    return _pin(incr)


def refine_bridge(path: BridgePath, seed: Seed) -> BridgePath:
    """Insert a conditionally exact Brownian midpoint into every grid interval."""
    m = path.m
    h = 1.0 / m
    mids = 0.5 * (path.values[:-1] + path.values[1:])
    mids = mids + math.sqrt(h / 4) * seed.generator().standard_normal(m)
    vals = np.empty(2 * m + 1)
    vals[0::2] = path.values
    vals[1::2] = mids
    return BridgePath(np.arange(2 * m + 1) / (2 * m), vals)


# ---------------------------------------------------------------- stable law


@dataclass(frozen=True)
class StableParams:
    """Totally right-skewed stable law attached to the infinite-variance case.

    The characteristic function is
    ``exp{-scale^a |t|^a [1 - i sgn(t) tan(pi a / 2)]}`` with ``a = 1/xi``
    and ``scale^a = Gamma(2 - 1/xi) |cos(pi / (2 xi))| / (1 - xi)``, i.e.
    index ``a``, skewness ``+1`` and zero shift in the S1 parametrization.
    """

    xi: float

    def __post_init__(self):
        if not 0.5 < self.xi < 1:
            raise BadXi(f"stable index 1/xi needs 1/2 < xi < 1, got {self.xi}")

    @property
    def index(self) -> float:
        return 1.0 / self.xi

    @property
    def skewness(self) -> float:
        return 1.0

    @property
    def location(self) -> float:
        return 0.0

    @property
    def scale_power(self) -> float:
        xi = self.xi
        return abs(gamma_fn(2 - 1 / xi) * math.cos(math.pi / (2 * xi)) / (1 - xi))

    @property
    def scale(self) -> float:
        return self.scale_power ** self.xi

    def cf(self, t):
        t = np.asarray(t, dtype=float)
        a = self.index
        expo = -self.scale_power * np.abs(t) ** a * (1 - 1j * np.sign(t) * math.tan(math.pi * a / 2))
        return np.exp(expo)


def literal_charfn_exponent(xi: float, t):
    """Exponent of the characteristic function with the coefficient's printed sign.

    Its real part is positive for ``1/2 < xi < 1``, so it is not a
    characteristic function; :meth:`StableParams.cf` uses the modulus of the
    coefficient.
    """
    t = np.asarray(t, dtype=float)
    coef = gamma_fn(2 - 1 / xi) * math.cos(math.pi / (2 * xi)) / (1 - xi)
    return -coef * np.abs(t) ** (1 / xi) * (1 - 1j * np.sign(t) * math.tan(math.pi / (2 * xi)))


def sample_stable(p: StableParams, seed: Seed, size: int | None = None):
    """Chambers-Mallows-Stuck draws (Weron's form for index != 1)."""
    rng = seed.generator()
    n = 1 if size is None else int(size)
    a, b = p.index, p.skewness
    v = rng.uniform(-math.pi / 2, math.pi / 2, n)
    w = rng.standard_exponential(n)
    tan_pa = math.tan(math.pi * a / 2)
    shift = math.atan(b * tan_pa) / a
    amp = (1 + b * b * tan_pa * tan_pa) ** (1 / (2 * a))
    av = a * (v + shift)
    x = amp * np.sin(av) / np.cos(v) ** (1 / a) * (np.cos(v - av) / w) ** ((1 - a) / a)
    x = p.scale * x + p.location
    return float(x[0]) if size is None else x


# --------------------------------------------------------------- functionals


class Side(str, enum.Enum):
    X = "X"
    Y = "Y"


@functools.lru_cache(maxsize=64)
def _panel_weights(xi: float, m: int, quadrature: str) -> tuple[np.ndarray, np.ndarray]:
    """Weights (left, right) so that panel p contributes ``wl[p] B_p + wr[p] B_{p+1}``."""
    h = 1.0 / m
    p = np.arange(m, dtype=float)
    if quadrature == "trapezoid":
        wl = np.zeros(m)
        wl[1:] = 0.5 * h * (p[1:] * h) ** (-(1 + xi))
        wr = 0.5 * h * ((p + 1) * h) ** (-(1 + xi))
    elif quadrature == "linear":
        q = p[1:]
        lg = np.log1p(1 / q)
        # A = int_q^{q+1} u^-xi du,  Bint = int_q^{q+1} u^-(1+xi) du
        a_int = q ** (1 - xi) * np.expm1((1 - xi) * lg) / (1 - xi)
        b_int = lg if xi == 0 else -(q ** -xi) * np.expm1(-xi * lg) / xi
        wl = np.zeros(m)
        wr = np.zeros(m)
        wl[1:] = (q + 1) * b_int - a_int
        wr[1:] = a_int - q * b_int
        wr[0] = 1 / (1 - xi)
        scale = h ** (-xi)
        wl *= scale
        wr *= scale
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    wl.setflags(write=False)
    wr.setflags(write=False)
    return wl, wr


def singular_integral(values: np.ndarray, xi: float, quadrature: str = "linear") -> np.ndarray:
    """``int_0^{t_j} y^-(1+xi) B(y) dy`` at every grid point (last axis is time)."""
    values = np.asarray(values, dtype=float)
    m = values.shape[-1] - 1
    wl, wr = _panel_weights(float(xi), m, quadrature)
    contrib = values[..., :-1] * wl + values[..., 1:] * wr
    out = np.zeros(values.shape)
    np.cumsum(contrib, axis=-1, out=out[..., 1:])
    return out


def _check_xi(case: PlotCase, xi: float, side: Side) -> None:
    if case is PlotCase.FRECHET:
        upper = 0.5 if side is Side.Y else 1.0
        if not 0 < xi < upper:
            raise BadXi(f"Frechet {side.value}-functional needs 0 < xi < {upper}, got {xi}")
    elif case is PlotCase.WEIBULL and not xi < 0:
        raise BadXi(f"Weibull functionals need xi < 0, got {xi}")


def _start_index(eps: float, m: int) -> int:
    if not 0 < eps < 1:
        raise BadParam(f"eps must lie in (0, 1), got {eps}")
    if math.floor(eps * m) < 4:
        raise GridTooCoarse(f"floor(eps*m) = {math.floor(eps * m)} < 4 for eps={eps}, m={m}")
    return math.ceil(round(eps * m, 9))


def _bridge_at_inv_e(values: np.ndarray) -> np.ndarray:
    m = values.shape[-1] - 1
    pos = m / math.e
    j = int(math.floor(pos))
    frac = pos - j
    return (1 - frac) * values[..., j] + frac * values[..., j + 1]


def _process(values: np.ndarray, case: PlotCase, side: Side, xi: float, j0: int, quadrature: str) -> np.ndarray:
    """Pre-supremum process on grid points ``j0..m``."""
    m = values.shape[-1] - 1
    t = np.arange(j0, m + 1) / m
    b = values[..., j0:]
    if case is PlotCase.GUMBEL:
        anchor = math.e * _bridge_at_inv_e(values)[..., None]
        if side is Side.X:
            return anchor * np.log(t) + b / t
        return anchor + singular_integral(values, 0.0, quadrature)[..., j0:] / t
    if side is Side.X:
        return xi * t ** (-(1 + xi)) * b
    return xi * singular_integral(values, xi, quadrature)[..., j0:] / t


def sup_functional(
    case: PlotCase | str,
    side: Side | str,
    xi: float,
    eps: float,
    path: BridgePath,
    quadrature: str = "linear",
) -> float:
    case, side = PlotCase(case), Side(side)
    _check_xi(case, xi, side)
    j0 = _start_index(eps, path.m)
    return float(np.max(_process(path.values, case, side, xi, j0, quadrature)))


def functional_suprema(
    values: np.ndarray,
    case: PlotCase | str,
    side: Side | str,
    xi: float,
    eps_values: Sequence[float],
    quadrature: str = "linear",
) -> np.ndarray:
    """Suprema for a block of paths (rows) and several truncations at once.

    Returns an array of shape ``(len(eps_values), n_paths)``.  All truncations
    share one running maximum, so results for larger eps are pathwise no larger.
    """
    case, side = PlotCase(case), Side(side)
    _check_xi(case, xi, side)
    values = np.atleast_2d(values)
    m = values.shape[-1] - 1
    starts = [_start_index(e, m) for e in eps_values]
    j_min = min(starts)
    proc = _process(values, case, side, xi, j_min, quadrature)
    # running max from t = 1 backwards: tail_max[:, c] = max over columns >= c
    tail_max = np.maximum.accumulate(proc[:, ::-1], axis=1)[:, ::-1]
    return np.stack([tail_max[:, j - j_min] for j in starts])
