"""Plot documents and their deterministic SVG rendering.

A :class:`PlotDocument` is plain data (points, line segments, band boxes) and
can be dumped to JSON.  :func:`render_svg` draws it with matplotlib's Agg/SVG
backend using a fixed hash salt and no date metadata, so identical documents
give byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .bands import ConfidenceBand
from .coverage import FigureBundle
from .estimators import EstimatorPath
from .sample import ReferenceLine, ScaledMEPlot

# light shade for 95% boxes, dark shade for 90%
BAND_COLORS = {0.05: "#a6cee3", 0.10: "#1f4e9c"}
_FALLBACK = "#7f7f7f"
LINE_COLOR = "#d62728"


@dataclass
class BandSeries:
    alpha: float
    boxes: list[tuple[float, float, float, float]]
    point_index: list[int]

    @property
    def label(self) -> str:
        return f"{round(100 * (1 - self.alpha))}% band"


@dataclass
class PlotDocument:
    title: str
    xlabel: str
    ylabel: str
    points: list[tuple[float, float]] = field(default_factory=list)
    lines: list[dict] = field(default_factory=list)
    bands: list[BandSeries] = field(default_factory=list)
    curves: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for b in self.bands:
            if any(not 0 <= i < len(self.points) for i in b.point_index):
                raise ValueError("band box refers to a missing plot point")

    @property
    def legend(self) -> list[str]:
        out = [b.label for b in sorted(self.bands, key=lambda b: -b.alpha)]
        out += [ln["label"] for ln in self.lines] + [c["label"] for c in self.curves]
        if self.points:
            out.insert(0, "ME plot")
        return out

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "xlabel": self.xlabel,
            "ylabel": self.ylabel,
            "points": [list(p) for p in self.points],
            "lines": self.lines,
            "bands": [{"alpha": b.alpha, "boxes": [list(x) for x in b.boxes]} for b in self.bands],
            "curves": self.curves,
            "legend": self.legend,
        }


def me_plot_document(
    plot: ScaledMEPlot | None,
    bands: list[ConfidenceBand] = (),
    line: ReferenceLine | None = None,
    title: str = "",
    raw_points: list[tuple[float, float]] | None = None,
) -> PlotDocument:
    if plot is not None:
        pts = [(float(a), float(b)) for a, b in zip(plot.x, plot.y)]
        xlabel, ylabel = f"scaled threshold ({plot.case.value})", "scaled mean excess"
    else:
        pts = [(float(a), float(b)) for a, b in raw_points or []]
        xlabel, ylabel = "threshold u", "mean excess"
    doc = PlotDocument(title, xlabel, ylabel, pts)
    for b in bands:
        doc.bands.append(BandSeries(b.alpha, b.boxes, list(range(len(b)))))
    if line is not None:
        doc.lines.append(
            {
                "label": f"reference ({line.case.value}, xi={line.xi:g})",
                "x": [line.x_start, line.x_end],
                "y": [float(line(line.x_start)), float(line(line.x_end))],
            }
        )
    doc.__post_init__()
    return doc


def estimator_document(paths: dict[str, EstimatorPath], title: str = "", truth: float | None = None) -> PlotDocument:
    doc = PlotDocument(title, "k", "xi estimate")
    for name, p in paths.items():
        doc.curves.append({"label": name, "x": [int(k) for k in p.ks], "y": [float(v) for v in p.values]})
    if truth is not None and paths:
        ks = np.concatenate([p.ks for p in paths.values()])
        doc.lines.append({"label": f"true xi = {truth:g}", "x": [int(ks.min()), int(ks.max())], "y": [truth, truth]})
    return doc


def render_svg(doc: PlotDocument) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    with matplotlib.rc_context({"svg.hashsalt": "mebands", "svg.fonttype": "none", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        # the wider 95% boxes go underneath the 90% ones
        for b in sorted(doc.bands, key=lambda b: b.alpha):
            color = BAND_COLORS.get(round(b.alpha, 6), _FALLBACK)
            for i, (x0, x1, y0, y1) in enumerate(b.boxes):
                ax.add_patch(
                    Rectangle((x0, y0), x1 - x0, y1 - y0, facecolor=color, edgecolor="none", alpha=0.8,
                              label=b.label if i == 0 else None)
                )
        if doc.points:
            xs, ys = zip(*doc.points)
            ax.plot(xs, ys, ".", color="black", markersize=2, label="ME plot")
        for c in doc.curves:
            ax.plot(c["x"], c["y"], "-", linewidth=1, label=c["label"])
        for ln in doc.lines:
            ax.plot(ln["x"], ln["y"], "--", color=LINE_COLOR, linewidth=1.2, label=ln["label"])
        ax.autoscale_view()
        ax.set_title(doc.title)
        ax.set_xlabel(doc.xlabel)
        ax.set_ylabel(doc.ylabel)
        if doc.legend:
            ax.legend(loc="best", fontsize="small")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def bundle_documents(bundle: FigureBundle) -> dict[str, PlotDocument]:
    """Named documents for a figure bundle: estimator panel plus one per (k, eps)."""
    docs = {
        "estimators": estimator_document(
            bundle.estimator_paths, f"{bundle.preset.value}: Pickands and Moment estimates", bundle.xi
        )
    }
    for p in bundle.panels:
        name = f"panel_k{p.k}_eps{p.eps:g}"
        docs[name] = me_plot_document(
            p.plot,
            [p.bands[a] for a in sorted(p.bands)],
            p.line,
            f"{bundle.preset.value}: k={p.k}, eps={p.eps:g}",
        )
    return docs
