"""Monte-Carlo band quantiles, their tables and on-disk persistence.

For every band case the half-widths are empirical ``(1 - alpha)`` quantiles of
bridge-functional suprema (see :mod:`mebands.stochastic`).  In the
infinite-variance Frechet case the y half-width is a quantile of the stable law
instead.

The empirical quantile is pinned to the ``ceil((1 - alpha) R)``-th smallest of
``R`` simulated values.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadParam, BadXi, IncompatibleCase, MEBandsError, NotCovered
from .sample import PlotCase
from .stochastic import (
    GENERATOR_ID,
    Seed,
    Side,
    StableParams,
    bridge_block,
    functional_suprema,
    sample_stable,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_REPLICATES = 100_000
DEFAULT_GRID_M = 2**12
XI_DECIMALS = 3
_BLOCK = 256


class QuantileCase(str, enum.Enum):
    FRECHET_FINITE_VAR = "FrechetFiniteVar"
    FRECHET_INFINITE_VAR = "FrechetInfiniteVar"
    GUMBEL = "Gumbel"
    WEIBULL = "Weibull"

    @property
    def plot_case(self) -> PlotCase:
        if self in (QuantileCase.FRECHET_FINITE_VAR, QuantileCase.FRECHET_INFINITE_VAR):
            return PlotCase.FRECHET
        return PlotCase(self.value)

    @classmethod
    def for_xi(cls, xi: float) -> "QuantileCase":
        """Band case implied by an extreme value index (xi == 0 means Gumbel)."""
        if xi == 0:
            return cls.GUMBEL
        if xi < 0:
            return cls.WEIBULL
        if 0 < xi < 0.5:
            return cls.FRECHET_FINITE_VAR
        if 0.5 < xi < 1:
            return cls.FRECHET_INFINITE_VAR
        raise IncompatibleCase(f"no band case for xi={xi} (xi = 1/2 and xi >= 1 are excluded)")


def check_case_xi(case: QuantileCase, xi: float) -> None:
    if case is QuantileCase.FRECHET_FINITE_VAR and not 0 < xi < 0.5:
        raise IncompatibleCase(f"FrechetFiniteVar requires 0 < xi < 1/2, got {xi}")
    if case is QuantileCase.FRECHET_INFINITE_VAR and not 0.5 < xi < 1:
        raise IncompatibleCase(f"FrechetInfiniteVar requires 1/2 < xi < 1, got {xi}")
    if case is QuantileCase.WEIBULL and not xi < 0:
        raise IncompatibleCase(f"Weibull requires xi < 0, got {xi}")


def round_xi(case: QuantileCase, xi: float) -> float:
    return 0.0 if case is QuantileCase.GUMBEL else round(float(xi), XI_DECIMALS)


@dataclass(frozen=True)
class QuantileRequest:
    case: QuantileCase
    xi: float
    eps: float
    alpha: float
    replicates: int = DEFAULT_REPLICATES
    grid_m: int = DEFAULT_GRID_M
    seed: Seed = field(default_factory=lambda: Seed(0))

    def __post_init__(self):
        object.__setattr__(self, "case", QuantileCase(self.case))
        object.__setattr__(self, "seed", Seed.coerce(self.seed))
        if self.case is QuantileCase.GUMBEL:
            object.__setattr__(self, "xi", 0.0)
        object.__setattr__(self, "xi", float(self.xi))
        check_case_xi(self.case, self.xi)
        if not 0 < self.eps < 1:
            raise BadParam(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.alpha < 1:
            raise BadParam(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replicates < 1000:
            raise BadParam(f"replicates must be >= 1000, got {self.replicates}")
        if math.floor(self.eps * self.grid_m) < 4:
            raise BadParam(f"grid_m={self.grid_m} is too coarse for eps={self.eps}")

    @property
    def key(self) -> tuple:
        return table_key(self.case, self.xi, self.eps, self.alpha)

    def as_dict(self) -> dict:
        return {
            "case": self.case.value,
            "xi": self.xi,
            "eps": self.eps,
            "alpha": self.alpha,
            "replicates": self.replicates,
            "grid_m": self.grid_m,
            "seed": self.seed.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "QuantileRequest":
        return cls(
            case=QuantileCase(d["case"]),
            xi=d["xi"],
            eps=d["eps"],
            alpha=d["alpha"],
            replicates=d["replicates"],
            grid_m=d["grid_m"],
            seed=Seed.coerce(d["seed"]),
        )


def table_key(case, xi: float, eps: float, alpha: float) -> tuple:
    case = QuantileCase(case)
    return (case.value, round_xi(case, xi), round(float(eps), 12), round(float(alpha), 12))


@dataclass(frozen=True)
class QuantileResult:
    c: float | None
    d: float
    request: QuantileRequest
    generator: str = GENERATOR_ID
    created: str | None = None
    interpolated: bool = False

    @property
    def case(self) -> QuantileCase:
        return self.request.case

    @property
    def xi(self) -> float:
        return self.request.xi

    @property
    def eps(self) -> float:
        return self.request.eps

    @property
    def alpha(self) -> float:
        return self.request.alpha

    def as_dict(self) -> dict:
        out = {"c": self.c, "d": self.d, "request": self.request.as_dict(), "generator": self.generator}
        if self.created is not None:
            out["created"] = self.created
        if self.interpolated:
            out["interpolated"] = True
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "QuantileResult":
        return cls(
            c=None if d.get("c") is None else float(d["c"]),
            d=float(d["d"]),
            request=QuantileRequest.from_dict(d["request"]),
            generator=d.get("generator", GENERATOR_ID),
            created=d.get("created"),
            interpolated=bool(d.get("interpolated", False)),
        )


def _created_stamp() -> str | None:
    # reproducible-builds convention; absent unless explicitly requested
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch)))


def empirical_quantile(values: np.ndarray, alpha: float) -> float:
    """The ``ceil((1 - alpha) R)``-th smallest of ``R`` values."""
    values = np.asarray(values, dtype=float).ravel()
    r = values.size
    if r == 0:
        raise BadParam("empty replicate set")
    idx = min(max(math.ceil(round((1 - alpha) * r, 9)), 1), r)
    return float(np.partition(values, idx - 1)[idx - 1])


# ------------------------------------------------------------- simulation


def _specs_for(case: QuantileCase, xi: float) -> list[tuple[PlotCase, Side, float]]:
    pc = case.plot_case
    if case is QuantileCase.FRECHET_INFINITE_VAR:
        return [(pc, Side.X, xi)]
    return [(pc, Side.X, xi), (pc, Side.Y, xi)]


def simulate_suprema(
    specs: Iterable[tuple[PlotCase, Side, float]],
    eps_values: Sequence[float],
    replicates: int,
    grid_m: int,
    seed: Seed,
    threads: int | None = None,
    quadrature: str = "linear",
) -> dict[tuple[PlotCase, Side, float], np.ndarray]:
    """Suprema of several functionals on one shared set of bridge paths.

    Returns, per ``(case, side, xi)``, an array of shape ``(len(eps), replicates)``.
    """
    specs = list(dict.fromkeys(specs))
    eps_values = list(eps_values)
    starts = list(range(0, replicates, _BLOCK))

    def run(start: int):
        paths = bridge_block(seed, range(start, min(start + _BLOCK, replicates)), grid_m)
        return {s: functional_suprema(paths, s[0], s[1], s[2], eps_values, quadrature) for s in specs}

    workers = threads or default_threads()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, starts))
    else:
        blocks = [run(s) for s in starts]
    return {s: np.concatenate([b[s] for b in blocks], axis=1) for s in specs}


def default_threads() -> int:
    env = os.environ.get("MEBANDS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def stable_quantile(xi: float, alpha: float, replicates: int, seed: Seed) -> float:
    if not 0.5 < xi < 1:
        raise BadXi(f"stable quantiles need 1/2 < xi < 1, got {xi}")
    if not 0 < alpha < 1:
        raise BadParam(f"alpha must lie in (0, 1), got {alpha}")
    draws = sample_stable(StableParams(xi), Seed.coerce(seed), replicates)
    return empirical_quantile(draws, alpha)


def _results_from(req: QuantileRequest, sups: Mapping, eps_index: int) -> QuantileResult:
    pc = req.case.plot_case
    c = empirical_quantile(sups[(pc, Side.X, req.xi)][eps_index], req.alpha)
    if req.case is QuantileCase.FRECHET_INFINITE_VAR:
        d = stable_quantile(req.xi, req.alpha, req.replicates, req.seed)
    else:
        d = empirical_quantile(sups[(pc, Side.Y, req.xi)][eps_index], req.alpha)
    return QuantileResult(c=c, d=d, request=req, created=_created_stamp())


def mc_quantile(req: QuantileRequest, threads: int | None = None) -> QuantileResult:
    sups = simulate_suprema(_specs_for(req.case, req.xi), [req.eps], req.replicates, req.grid_m, req.seed, threads)
    return _results_from(req, sups, 0)


# ------------------------------------------------------------------ tables


@dataclass
class QuantileTable:
    entries: dict[tuple, QuantileResult] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION
    generator: str = GENERATOR_ID

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, result: QuantileResult) -> None:
        key = result.request.key
        if key in self.entries:
            log.warning("duplicate quantile key %s; keeping the later entry", key)
        self.entries[key] = result

    def lookup(self, case, xi: float, eps: float, alpha: float) -> QuantileResult:
        return table_lookup(self, case, xi, eps, alpha)

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "generator": self.generator,
            "entries": [self.entries[k].as_dict() for k in sorted(self.entries)],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QuantileTable":
        doc = json.loads(text)
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise BadParam(f"unsupported quantile table format_version {version!r}")
        table = cls(format_version=version, generator=doc.get("generator", GENERATOR_ID))
        for entry in doc.get("entries", []):
            res = QuantileResult.from_dict(entry)
            table.entries[res.request.key] = res
        return table

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "QuantileTable":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


class TableBuildError(MEBandsError):
    def __init__(self, key, cause: MEBandsError):
        super().__init__(f"entry {key}: {cause}")
        self.key = key
        self.cause = cause
        self.exit_code = cause.exit_code


def table_build(requests: Sequence[QuantileRequest], threads: int | None = None) -> QuantileTable:
    """Evaluate a batch of requests; requests sharing a seed share bridge paths."""
    table = QuantileTable()
    groups: dict[tuple, list[QuantileRequest]] = defaultdict(list)
    for req in requests:
        groups[(req.replicates, req.grid_m, req.seed)].append(req)
    results: dict[int, QuantileResult] = {}
    order = {id(r): i for i, r in enumerate(requests)}
    for (reps, grid_m, seed), reqs in groups.items():
        eps_values = sorted({r.eps for r in reqs})
        specs = [s for r in reqs for s in _specs_for(r.case, r.xi)]
        sups = simulate_suprema(specs, eps_values, reps, grid_m, seed, threads)
        for req in reqs:
            try:
                results[order[id(req)]] = _results_from(req, sups, eps_values.index(req.eps))
            except MEBandsError as exc:
                raise TableBuildError(req.key, exc) from exc
    for i in sorted(results):
        table.add(results[i])
    return table


def table_lookup(t: QuantileTable, case, xi: float, eps: float, alpha: float) -> QuantileResult:
    if not t.entries:
        raise NotCovered("quantile table is empty")
    case = QuantileCase(case)
    key = table_key(case, xi, eps, alpha)
    if key in t.entries:
        return t.entries[key]
    same = sorted(
        (k[1], res) for k, res in t.entries.items() if k[0] == key[0] and k[2] == key[2] and k[3] == key[3]
    )
    x = key[1]
    lower = [(xv, r) for xv, r in same if xv <= x]
    upper = [(xv, r) for xv, r in same if xv >= x]
    if not lower or not upper:
        raise NotCovered(f"no stored entries bracket {key}")
    (x0, r0), (x1, r1) = lower[-1], upper[0]
    w = (x - x0) / (x1 - x0)
    c = None if r0.c is None or r1.c is None else (1 - w) * r0.c + w * r1.c
    d = (1 - w) * r0.d + w * r1.d
    req = replace(r0.request, xi=float(xi) if case is not QuantileCase.GUMBEL else 0.0)
    return QuantileResult(c=c, d=d, request=req, generator=r0.generator, created=r0.created, interpolated=True)


# ------------------------------------------------------------------ provider


class QuantileProvider:
    """Quantile source for bands: a fixed table, or Monte Carlo with memoization.

    With ``table`` set, lookups never simulate.  Otherwise results are computed
    on demand and kept; ``cache_path`` persists them as a quantile table.
    """

    def __init__(
        self,
        table: QuantileTable | None = None,
        replicates: int = DEFAULT_REPLICATES,
        grid_m: int = DEFAULT_GRID_M,
        seed: Seed | int = 0,
        cache_path: str | os.PathLike | None = None,
        threads: int | None = None,
    ):
        self.table = table
        self.replicates = replicates
        self.grid_m = grid_m
        self.seed = Seed.coerce(seed)
        self.threads = threads
        self.cache_path = Path(cache_path) if cache_path else None
        self._memo = QuantileTable()
        if self.cache_path and self.cache_path.exists():
            self._memo = QuantileTable.load(self.cache_path)

    def _matches(self, res: QuantileResult) -> bool:
        r = res.request
        return (r.replicates, r.grid_m, r.seed) == (self.replicates, self.grid_m, self.seed)

    def get(self, case, xi: float, eps: float, alpha: float) -> QuantileResult:
        case = QuantileCase(case)
        if self.table is not None:
            return table_lookup(self.table, case, xi, eps, alpha)
        key = table_key(case, xi, eps, alpha)
        hit = self._memo.entries.get(key)
        if hit is not None and self._matches(hit):
            return hit
        self.prefetch([(case, xi, eps, alpha)])
        return self._memo.entries[key]

    def prefetch(self, keys: Iterable[tuple]) -> None:
        """Compute missing ``(case, xi, eps, alpha)`` entries on shared paths."""
        if self.table is not None:
            return
        todo = []
        for case, xi, eps, alpha in keys:
            case = QuantileCase(case)
            k = table_key(case, xi, eps, alpha)
            hit = self._memo.entries.get(k)
            if hit is None or not self._matches(hit):
                todo.append(
                    QuantileRequest(case, round_xi(case, xi), eps, alpha, self.replicates, self.grid_m, self.seed)
                )
        if not todo:
            return
        built = table_build(list({r.key: r for r in todo}.values()), self.threads)
        self._memo.entries.update(built.entries)
        if self.cache_path:
            self._memo.save(self.cache_path)
