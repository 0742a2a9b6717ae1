"""Confidence bands around scaled ME plots, line containment and detection.

A band is one rectangle per plot point.  In the Frechet finite-variance,
Gumbel and Weibull cases the rectangle is the point inflated by
``(+-c/sqrt(k), +-d/sqrt(k))`` where ``c, d`` are the ``alpha/2`` quantiles of the
case's functionals.  In the Frechet infinite-variance case the y-interval is
``y + X_(1) [d_lo, d_hi] / (i X_(k))`` with stable quantiles ``d_lo, d_hi``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadAlphaSplit, BadXi, CaseMismatch, MEBandsError, QuantileMismatch
from .estimators import Method, estimate
from .quantiles import QuantileCase, QuantileProvider, QuantileResult, round_xi
from .sample import PlotCase, ReferenceLine, ScaledMEPlot, SortedSample, reference_line, scaled_plot

log = logging.getLogger(__name__)

COVERAGE_THRESHOLD = 0.95
GUMBEL_THRESHOLD = 0.05


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    case: QuantileCase
    alpha: float
    plot: ScaledMEPlot
    x_lo: np.ndarray
    x_hi: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    quantile_meta: tuple = ()
    alpha_split: tuple[float, float] | None = None
    # (x, y) half-widths of uniform bands; None when the y-interval varies by point
    half_widths: tuple[float, float] | None = None

    @property
    def boxes(self) -> list[tuple[float, float, float, float]]:
        return [tuple(map(float, b)) for b in zip(self.x_lo, self.x_hi, self.y_lo, self.y_hi)]

    def __len__(self) -> int:
        return int(self.x_lo.size)


def _check_quantile(q: QuantileResult, case: QuantileCase, xi: float, eps: float | None, alpha_half: float) -> None:
    problems = []
    if q.case is not case:
        problems.append(f"case {q.case.value} != {case.value}")
    if round_xi(case, q.xi) != round_xi(case, xi):
        problems.append(f"xi {q.xi} != {xi}")
    if eps is not None and not math.isclose(q.eps, eps, rel_tol=0, abs_tol=1e-12):
        problems.append(f"eps {q.eps} != {eps}")
    if not math.isclose(q.alpha, alpha_half, rel_tol=0, abs_tol=1e-12):
        problems.append(f"alpha {q.alpha} != {alpha_half}")
    if problems:
        raise QuantileMismatch("quantile does not match the band: " + "; ".join(problems))


def _uniform_band(plot, case, alpha, c, d, k, meta) -> ConfidenceBand:
    hx = c / math.sqrt(k)
    hy = d / math.sqrt(k)
    return ConfidenceBand(
        case=case,
        alpha=alpha,
        plot=plot,
        x_lo=plot.x - hx,
        x_hi=plot.x + hx,
        y_lo=plot.y - hy,
        y_hi=plot.y + hy,
        quantile_meta=meta,
        half_widths=(hx, hy),
    )


def _require_plot(plot: ScaledMEPlot, case: PlotCase) -> None:
    if plot.case is not case:
        raise CaseMismatch(f"expected a {case.value} plot, got {plot.case.value}")


def band_frechet_finite_var(plot: ScaledMEPlot, xi: float, alpha: float, q: QuantileResult, k: int) -> ConfidenceBand:
    _require_plot(plot, PlotCase.FRECHET)
    if not 0 < xi < 0.5:
        raise BadXi(f"finite-variance Frechet band needs 0 < xi < 1/2, got {xi}")
    _check_quantile(q, QuantileCase.FRECHET_FINITE_VAR, xi, plot.epsilon, alpha / 2)
    return _uniform_band(plot, QuantileCase.FRECHET_FINITE_VAR, alpha, q.c, q.d, k, (q,))


def symmetric_alpha_split(alpha: float) -> tuple[float, float]:
    a = 1 - math.sqrt(1 - alpha)
    return a, a


def band_frechet_infinite_var(
    plot: ScaledMEPlot,
    xi: float,
    alpha1: float,
    alpha2: float,
    c: float,
    d_lo: float,
    d_hi: float,
    k: int,
    alpha: float | None = None,
    quantile_meta: tuple = (),
) -> ConfidenceBand:
    """Band with x half-width ``c/sqrt(k)`` and per-point stable y-interval.

    ``c`` is the ``alpha1/2`` X-functional quantile; ``d_lo`` and ``d_hi`` are
    the ``alpha2/2`` and ``1 - alpha2/2`` quantiles of the stable law.
    """
    _require_plot(plot, PlotCase.FRECHET)
    if not 0.5 < xi < 1:
        raise BadXi(f"infinite-variance Frechet band needs 1/2 < xi < 1, got {xi}")
    if not (0 < alpha1 < 1 and 0 < alpha2 < 1):
        raise BadAlphaSplit(f"alpha1, alpha2 must lie in (0, 1), got {alpha1}, {alpha2}")
    confidence = (1 - alpha1) * (1 - alpha2)
    if alpha is None:
        alpha = 1 - confidence
    elif abs(confidence - (1 - alpha)) > 1e-9:
        raise BadAlphaSplit(f"(1-alpha1)(1-alpha2) = {confidence} != 1-alpha = {1 - alpha}")
    hx = c / math.sqrt(k)
    factor = plot.normalizers["X_1"] / (plot.index * plot.normalizers["X_k"])
    return ConfidenceBand(
        case=QuantileCase.FRECHET_INFINITE_VAR,
        alpha=alpha,
        plot=plot,
        x_lo=plot.x - hx,
        x_hi=plot.x + hx,
        y_lo=plot.y + factor * d_lo,
        y_hi=plot.y + factor * d_hi,
        quantile_meta=tuple(quantile_meta),
        alpha_split=(alpha1, alpha2),
    )


def band_gumbel(plot: ScaledMEPlot, alpha: float, q: QuantileResult, k: int) -> ConfidenceBand:
    _require_plot(plot, PlotCase.GUMBEL)
    _check_quantile(q, QuantileCase.GUMBEL, 0.0, plot.epsilon, alpha / 2)
    return _uniform_band(plot, QuantileCase.GUMBEL, alpha, q.c, q.d, k, (q,))


def band_weibull(plot: ScaledMEPlot, xi: float, alpha: float, q: QuantileResult, k: int) -> ConfidenceBand:
    _require_plot(plot, PlotCase.WEIBULL)
    if not xi < 0:
        raise BadXi(f"Weibull band needs xi < 0, got {xi}")
    _check_quantile(q, QuantileCase.WEIBULL, xi, plot.epsilon, alpha / 2)
    return _uniform_band(plot, QuantileCase.WEIBULL, alpha, q.c, q.d, k, (q,))


def build_band(
    plot: ScaledMEPlot,
    case: QuantileCase | str,
    xi: float,
    alpha: float,
    provider: QuantileProvider,
    k: int | None = None,
) -> ConfidenceBand:
    """Fetch the quantiles a band needs from ``provider`` and assemble it."""
    case = QuantileCase(case)
    k = plot.k if k is None else k
    eps = plot.epsilon
    if eps is None:
        raise QuantileMismatch("bands need a truncated plot (eps set)")
    if case is QuantileCase.FRECHET_INFINITE_VAR:
        a1, a2 = symmetric_alpha_split(alpha)
        qc = provider.get(case, xi, eps, a1 / 2)
        q_hi = provider.get(case, xi, eps, a2 / 2)
        q_lo = provider.get(case, xi, eps, 1 - a2 / 2)
        return band_frechet_infinite_var(
            plot, xi, a1, a2, qc.c, q_lo.d, q_hi.d, k, alpha=alpha, quantile_meta=(qc, q_lo, q_hi)
        )
    q = provider.get(case, xi, eps, alpha / 2)
    if case is QuantileCase.GUMBEL:
        return band_gumbel(plot, alpha, q, k)
    if case is QuantileCase.WEIBULL:
        return band_weibull(plot, xi, alpha, q, k)
    return band_frechet_finite_var(plot, xi, alpha, q, k)


def band_quantile_keys(case: QuantileCase, xi: float, eps: float, alpha: float) -> list[tuple]:
    """The ``(case, xi, eps, alpha)`` quantile entries ``build_band`` will request."""
    if case is QuantileCase.FRECHET_INFINITE_VAR:
        a1, a2 = symmetric_alpha_split(alpha)
        return [(case, xi, eps, a1 / 2), (case, xi, eps, a2 / 2), (case, xi, eps, 1 - a2 / 2)]
    return [(case, xi, eps, alpha / 2)]


@dataclass(frozen=True)
class Containment:
    covered_fraction: float
    passed: bool
    per_box: np.ndarray = field(repr=False, compare=False, default=None)

    def __iter__(self):
        yield self.covered_fraction
        yield self.passed


def contains_line(
    band: ConfidenceBand,
    line: ReferenceLine,
    threshold: float = COVERAGE_THRESHOLD,
    rule: str = "intersect",
) -> Containment:
    """Fraction of boxes the reference segment passes through.

    ``rule="intersect"`` counts a box when the segment meets the closed
    rectangle.  ``rule="center"`` counts it when the line's value at the box's
    x-center lies in ``[y_lo, y_hi]`` and the segment's x-range overlaps the
    box's.
    """
    if line.case is not band.case.plot_case:
        raise CaseMismatch(f"line case {line.case.value} != band case {band.case.plot_case.value}")
    lo = np.maximum(band.x_lo, line.x_start)
    hi = np.minimum(band.x_hi, line.x_end)
    overlap = lo <= hi
    if rule == "center":
        xc = 0.5 * (band.x_lo + band.x_hi)
        yc = line(xc)
        ok = overlap & (yc >= band.y_lo) & (yc <= band.y_hi)
    elif rule == "intersect":
        ya, yb = line(lo), line(hi)
        ok = overlap & (np.maximum(ya, yb) >= band.y_lo) & (np.minimum(ya, yb) <= band.y_hi)
    else:
        raise ValueError(f"unknown containment rule {rule!r}")
    frac = float(np.mean(ok)) if ok.size else 0.0
    return Containment(frac, frac >= threshold, ok)


# ----------------------------------------------------------------- detect


@dataclass
class DetectConfig:
    k: int
    eps: float = 0.2
    alpha: float = 0.05
    report_alphas: Sequence[float] = (0.10,)
    method: Method | str = Method.PICKANDS
    gumbel_threshold: float = GUMBEL_THRESHOLD
    coverage_threshold: float = COVERAGE_THRESHOLD
    rule: str = "intersect"
    case: QuantileCase | str | None = None
    quantiles: QuantileProvider = field(default_factory=QuantileProvider)

    @property
    def alphas(self) -> list[float]:
        return list(dict.fromkeys([self.alpha, *self.report_alphas]))


@dataclass
class CaseResult:
    case: QuantileCase
    xi_used: float
    alpha: float
    covered_fraction: float | None
    passed: bool
    error: str | None = None
    band: ConfidenceBand | None = field(default=None, repr=False)
    line: ReferenceLine | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        out = {
            "case": self.case.value,
            "xi_used": self.xi_used,
            "alpha": self.alpha,
            "covered_fraction": self.covered_fraction,
            "pass": self.passed,
        }
        if self.error:
            out["error"] = self.error
        if self.band is not None:
            out["quantiles"] = [q.as_dict() for q in self.band.quantile_meta]
        return out


@dataclass
class Verdict:
    tested_cases: list[CaseResult]
    selected: str
    xi_hat: float | None
    diagnostics: dict

    def as_dict(self) -> dict:
        return {
            "selected": self.selected,
            "xi_hat": self.xi_hat,
            "tested_cases": [r.as_dict() for r in self.tested_cases],
            "diagnostics": self.diagnostics,
        }


INCONCLUSIVE = "Inconclusive"


def candidate_cases(xi_hat: float, gumbel_threshold: float) -> list[tuple[QuantileCase, float]]:
    """Band cases to test for an estimate: its own case, plus Gumbel near zero."""
    out = []
    if xi_hat != 0:
        try:
            out.append((QuantileCase.for_xi(xi_hat), xi_hat))
        except MEBandsError as exc:
            log.info("no band for xi_hat=%s: %s", xi_hat, exc)
    if abs(xi_hat) <= gumbel_threshold:
        out.append((QuantileCase.GUMBEL, 0.0))
    return out


def _estimator_panel(s: SortedSample, k: int) -> dict:
    panel = {}
    for m in Method:
        try:
            panel[m.value] = estimate(s, m, k).value
        except MEBandsError as exc:
            panel[m.value] = None
            panel[f"{m.value}_error"] = exc.kind
    return panel


def detect(s: SortedSample, config: DetectConfig) -> Verdict:
    """Estimate xi, test the implied band case(s), and pick a domain.

    Among the cases whose band passes at ``config.alpha``, the one with the
    smallest nominal ``|xi|`` is selected, so Gumbel wins over a near-zero
    Weibull or Frechet fit that also passes.  No passing case gives
    ``"Inconclusive"``.
    """
    method = Method.parse(config.method)
    diagnostics = {"k": config.k, "eps": config.eps, "method": method.value, "estimators": _estimator_panel(s, config.k)}
    xi_hat = diagnostics["estimators"].get(method.value)
    if config.case is not None:
        case = QuantileCase(config.case)
        xi_case = 0.0 if case is QuantileCase.GUMBEL else xi_hat
        candidates = [(case, xi_case)] if xi_case is not None else []
    elif xi_hat is None:
        candidates = []
    else:
        candidates = candidate_cases(xi_hat, config.gumbel_threshold)
    if xi_hat is None and not candidates:
        diagnostics["error"] = diagnostics["estimators"].get(f"{method.value}_error")

    results: list[CaseResult] = []
    for case, xi in candidates:
        xi_r = round_xi(case, xi)
        try:
            plot = scaled_plot(s, case.plot_case, config.k, config.eps)
            line = reference_line(case.plot_case, xi_r, config.eps)
        except MEBandsError as exc:
            for a in config.alphas:
                results.append(CaseResult(case, xi_r, a, None, False, f"{exc.kind}: {exc}"))
            continue
        for a in config.alphas:
            try:
                band = build_band(plot, case, xi_r, a, config.quantiles, config.k)
                cont = contains_line(band, line, config.coverage_threshold, config.rule)
            except MEBandsError as exc:
                results.append(CaseResult(case, xi_r, a, None, False, f"{exc.kind}: {exc}"))
                continue
            results.append(CaseResult(case, xi_r, a, cont.covered_fraction, cont.passed, band=band, line=line))

    passing = [r for r in results if r.alpha == config.alpha and r.passed and r.error is None]
    if passing:
        best = min(passing, key=lambda r: abs(r.xi_used))
        selected = best.case.plot_case.value
    else:
        selected = INCONCLUSIVE
    return Verdict(results, selected, xi_hat, diagnostics)
