"""Simulation harness: finite-sample band coverage and figure bundles.

Replication ``j`` of every cell draws its sample from ``Seed(root, stream=j)``,
so all (k, eps, alpha) cells of one configuration see the same samples.  Band
quantiles come from the configured :class:`QuantileProvider`, which uses its
own seed.
"""

from __future__ import annotations

import enum
import itertools
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bands import ConfidenceBand, band_quantile_keys, build_band, contains_line
from .errors import BadParam, MEBandsError
from .estimators import EstimatorPath, Method, estimate, estimator_path
from .quantiles import QuantileCase, QuantileProvider, round_xi
from .sample import ReferenceLine, ScaledMEPlot, reference_line, scaled_plot, sort_descending
from .stochastic import Family, Seed, family_params, family_tail, sample_family

log = logging.getLogger(__name__)

TRUE_XI = "true"


@dataclass
class ExperimentConfig:
    family: Family | str
    params: Mapping[str, float] = field(default_factory=dict)
    n: int = 10_000
    replications: int = 200
    ks: Sequence[int] = (1000,)
    eps_values: Sequence[float] = (0.2,)
    alphas: Sequence[float] = (0.05,)
    estimator: str = TRUE_XI
    case: QuantileCase | str | None = None
    seed: Seed | int = 0
    rule: str = "intersect"
    threshold: float = 0.95
    quantiles: QuantileProvider = field(default_factory=QuantileProvider, repr=False)

    def __post_init__(self):
        self.family = Family.parse(self.family)
        self.params = family_params(self.family, self.params)
        self.seed = Seed.coerce(self.seed)
        if self.case is not None:
            self.case = QuantileCase(self.case)
        if self.estimator != TRUE_XI:
            self.estimator = Method.parse(self.estimator).value
        if self.replications < 1 or self.n < 3:
            raise BadParam("replications must be >= 1 and n >= 3")
        if not (self.ks and self.eps_values and self.alphas):
            raise BadParam("ks, eps_values and alphas must be non-empty")

    @property
    def cells(self) -> list[tuple[int, float, float]]:
        return list(itertools.product(self.ks, self.eps_values, self.alphas))

    def band_target(self, xi: float) -> tuple[QuantileCase, float]:
        """Band case and the xi its quantiles and reference line use."""
        if self.case is not None:
            case = self.case
        else:
            case = QuantileCase.for_xi(xi)
        return case, round_xi(case, xi)

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": dict(self.params),
            "n": self.n,
            "replications": self.replications,
            "ks": list(self.ks),
            "eps_values": list(self.eps_values),
            "alphas": list(self.alphas),
            "estimator": self.estimator,
            "case": None if self.case is None else self.case.value,
            "seed": self.seed.as_dict(),
            "rule": self.rule,
            "threshold": self.threshold,
            "quantiles": {
                "replicates": self.quantiles.replicates,
                "grid_m": self.quantiles.grid_m,
                "seed": self.quantiles.seed.as_dict(),
                "table": self.quantiles.table is not None,
            },
        }


@dataclass(frozen=True)
class CoverageRow:
    replication: int
    k: int
    eps: float
    alpha: float
    case: str
    xi_used: float | None
    covered_fraction: float | None
    center_fraction: float | None
    passed: bool
    outcome: str

    FIELDS = (
        "replication",
        "k",
        "eps",
        "alpha",
        "case",
        "xi_used",
        "covered_fraction",
        "center_fraction",
        "pass",
        "outcome",
    )

    def values(self) -> tuple:
        return (
            self.replication,
            self.k,
            self.eps,
            self.alpha,
            self.case,
            self.xi_used,
            self.covered_fraction,
            self.center_fraction,
            int(self.passed),
            self.outcome,
        )


@dataclass
class CellSummary:
    family: str
    n: int
    k: int
    eps: float
    alpha: float
    coverage_rate: float
    mean_covered_fraction: float | None
    center_rule_rate: float
    verdicts: dict
    wall_clock: float = 0.0

    def as_dict(self, timing: bool = False) -> dict:
        out = {
            "family": self.family,
            "n": self.n,
            "k": self.k,
            "eps": self.eps,
            "alpha": self.alpha,
            "coverage_rate": self.coverage_rate,
            "mean_covered_fraction": self.mean_covered_fraction,
            "center_rule_rate": self.center_rule_rate,
            "verdicts": dict(sorted(self.verdicts.items())),
        }
        if timing:
            out["wall_clock_s"] = self.wall_clock
        return out


@dataclass
class CoverageReport:
    config: ExperimentConfig
    cells: list[CellSummary]
    rows: list[CoverageRow]

    def cell(self, k: int, eps: float, alpha: float) -> CellSummary:
        for c in self.cells:
            if (c.k, c.eps, c.alpha) == (k, eps, alpha):
                return c
        raise KeyError((k, eps, alpha))

    def summary(self, timing: bool = False) -> dict:
        from . import FORMAT_VERSION

        return {
            "format_version": FORMAT_VERSION,
            "kind": "coverage_report",
            "config": self.config.as_dict(),
            "cells": [c.as_dict(timing) for c in self.cells],
        }


def _evaluate(plot: ScaledMEPlot, line: ReferenceLine, case, xi, alpha, cfg: ExperimentConfig, k: int):
    band = build_band(plot, case, xi, alpha, cfg.quantiles, k)
    main = contains_line(band, line, cfg.threshold, cfg.rule)
    center = contains_line(band, line, cfg.threshold, "center")
    return main, center


def run_coverage(cfg: ExperimentConfig) -> CoverageReport:
    """Coverage of the reference line by the band, per (k, eps, alpha) cell.

    Failures inside a cell (estimator preconditions, band construction) are
    counted under their error kind and do not stop other cells.
    """
    true_xi, _ = family_tail(cfg.family, cfg.params)
    if cfg.estimator == TRUE_XI:
        case, xi = cfg.band_target(true_xi)
        cfg.quantiles.prefetch([key for k, e, a in cfg.cells for key in band_quantile_keys(case, xi, e, a)])

    rows: list[CoverageRow] = []
    clock: Counter = Counter()
    for j in range(cfg.replications):
        s = sort_descending(sample_family(cfg.family, cfg.params, cfg.n, Seed(cfg.seed.root, j)))
        for k, eps in itertools.product(cfg.ks, cfg.eps_values):
            t0 = time.perf_counter()
            try:
                xi_raw = true_xi if cfg.estimator == TRUE_XI else estimate(s, cfg.estimator, k).value
                case, xi = cfg.band_target(xi_raw)
                plot = scaled_plot(s, case.plot_case, k, eps)
                line = reference_line(case.plot_case, xi, eps)
            except MEBandsError as exc:
                for a in cfg.alphas:
                    rows.append(CoverageRow(j, k, eps, a, "", None, None, None, False, exc.kind))
                clock[(k, eps)] += time.perf_counter() - t0
                continue
            for a in cfg.alphas:
                try:
                    main, center = _evaluate(plot, line, case, xi, a, cfg, k)
                except MEBandsError as exc:
                    rows.append(CoverageRow(j, k, eps, a, case.value, xi, None, None, False, exc.kind))
                    continue
                rows.append(
                    CoverageRow(
                        j,
                        k,
                        eps,
                        a,
                        case.value,
                        xi,
                        main.covered_fraction,
                        center.covered_fraction,
                        main.passed,
                        "pass" if main.passed else "fail",
                    )
                )
            clock[(k, eps)] += time.perf_counter() - t0

    cells = []
    per_alpha = len(cfg.alphas)
    for k, eps, a in cfg.cells:
        sel = [r for r in rows if (r.k, r.eps, r.alpha) == (k, eps, a)]
        fracs = [r.covered_fraction for r in sel if r.covered_fraction is not None]
        centers = [r.center_fraction >= cfg.threshold for r in sel if r.center_fraction is not None]
        cells.append(
            CellSummary(
                family=cfg.family.value,
                n=cfg.n,
                k=k,
                eps=eps,
                alpha=a,
                coverage_rate=sum(r.passed for r in sel) / len(sel),
                mean_covered_fraction=float(np.mean(fracs)) if fracs else None,
                center_rule_rate=sum(centers) / len(sel),
                verdicts=dict(Counter(r.outcome for r in sel)),
                wall_clock=clock[(k, eps)] / per_alpha,
            )
        )
    return CoverageReport(cfg, cells, rows)


# ---------------------------------------------------------------- figures


class Preset(str, enum.Enum):
    GPD_NEG = "GPDneg"
    BETA22 = "Beta22"
    EXP1 = "Exp1"
    NORMAL = "Normal"
    LOGNORMAL = "Lognormal"

    @classmethod
    def parse(cls, name: "str | Preset") -> "Preset":
        if isinstance(name, Preset):
            return name
        for p in cls:
            if p.value.lower() == str(name).lower():
                return p
        raise BadParam(f"unknown preset {name!r}; valid: {', '.join(p.value for p in cls)}")


PRESETS = {
    Preset.GPD_NEG: (Family.GPD, {"xi": -0.5, "beta": 1.0}),
    Preset.BETA22: (Family.BETA, {"a": 2.0, "b": 2.0}),
    Preset.EXP1: (Family.EXPONENTIAL, {"rate": 1.0}),
    Preset.NORMAL: (Family.NORMAL, {"loc": 0.0, "scale": 1.0}),
    Preset.LOGNORMAL: (Family.LOGNORMAL, {"mu": 0.0, "sigma": 1.0}),
}

FIGURE_KS = (800, 1000)
FIGURE_EPS = (0.2, 0.3)
FIGURE_ALPHAS = (0.05, 0.10)


@dataclass(eq=False)
class FigurePanel:
    k: int
    eps: float
    plot: ScaledMEPlot
    line: ReferenceLine
    bands: dict[float, ConfidenceBand]
    errors: dict[float, str] = field(default_factory=dict)


@dataclass(eq=False)
class FigureBundle:
    preset: Preset
    family: Family
    params: dict
    n: int
    seed: Seed
    xi: float
    case: QuantileCase
    estimator_paths: dict[str, EstimatorPath]
    panels: list[FigurePanel]

    def metadata(self) -> dict:
        from . import FORMAT_VERSION

        return {
            "format_version": FORMAT_VERSION,
            "kind": "figure_bundle",
            "preset": self.preset.value,
            "family": self.family.value,
            "params": self.params,
            "n": self.n,
            "seed": self.seed.as_dict(),
            "xi": self.xi,
            "case": self.case.value,
            "panels": [
                {
                    "k": p.k,
                    "eps": p.eps,
                    "alphas": sorted(p.bands),
                    "errors": {str(a): e for a, e in sorted(p.errors.items())},
                    "quantiles": {
                        str(a): [q.as_dict() for q in b.quantile_meta] for a, b in sorted(p.bands.items())
                    },
                }
                for p in self.panels
            ],
        }


def reproduce_figures(
    preset: Preset | str,
    seed: Seed | int = 0,
    n: int = 10_000,
    quantiles: QuantileProvider | None = None,
    k_path: tuple[int, int, int] = (10, 2500, 10),
) -> FigureBundle:
    """Estimator paths plus banded scaled plots on the (k, eps) figure grid.

    Bands and lines use the family's true extreme value index.
    """
    preset = Preset.parse(preset)
    family, params = PRESETS[preset]
    seed = Seed.coerce(seed)
    quantiles = quantiles or QuantileProvider()
    s = sort_descending(sample_family(family, params, n, seed))
    xi, _ = family_tail(family, params)
    case = QuantileCase.for_xi(xi)
    xi = round_xi(case, xi)
    lo, hi, step = k_path
    paths = {m.value: estimator_path(s, m, lo, min(hi, s.n - 1), step) for m in (Method.PICKANDS, Method.MOMENT)}
    quantiles.prefetch([key for e in FIGURE_EPS for a in FIGURE_ALPHAS for key in band_quantile_keys(case, xi, e, a)])
    panels = []
    for k, eps in itertools.product(FIGURE_KS, FIGURE_EPS):
        plot = scaled_plot(s, case.plot_case, k, eps)
        panel = FigurePanel(k, eps, plot, reference_line(case.plot_case, xi, eps), {})
        for a in FIGURE_ALPHAS:
            try:
                panel.bands[a] = build_band(plot, case, xi, a, quantiles, k)
            except MEBandsError as exc:
                panel.errors[a] = f"{exc.kind}: {exc}"
        panels.append(panel)
    return FigureBundle(preset, family, params, n, seed, xi, case, paths, panels)


__all__ = [
    "ExperimentConfig",
    "CoverageRow",
    "CellSummary",
    "CoverageReport",
    "run_coverage",
    "Preset",
    "PRESETS",
    "FigurePanel",
    "FigureBundle",
    "reproduce_figures",
]
