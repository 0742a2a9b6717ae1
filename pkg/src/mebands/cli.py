"""Command-line interface: ``mebands <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric or precondition
error.  Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import FORMAT_VERSION, __version__
from .bands import DetectConfig, detect
from .coverage import TRUE_XI, ExperimentConfig, Preset, reproduce_figures, run_coverage
from .errors import MEBandsError
from .estimators import Method
from .fileio import format_number, read_column, read_dated_series, write_csv, write_json
from .preprocess import TimeSeries, run_pipeline
from .quantiles import (
    DEFAULT_GRID_M,
    DEFAULT_REPLICATES,
    QuantileCase,
    QuantileProvider,
    QuantileRequest,
    QuantileTable,
    table_build,
)
from .sample import PlotCase, me_plot_raw, scaled_plot, sort_descending
from .stochastic import Family, Seed, sample_family

log = logging.getLogger("mebands")

ENV_TABLE = "MEBANDS_TABLE"
ENV_THREADS = "MEBANDS_THREADS"


class UsageError(Exception):
    exit_code = 2


# ---------------------------------------------------------------- helpers


def _choice(enum_cls, label):
    def parse(text):
        try:
            return enum_cls.parse(text)
        except (ValueError, MEBandsError):
            raise argparse.ArgumentTypeError(
                f"unknown {label} {text!r}; valid: {', '.join(m.value for m in enum_cls)}"
            ) from None

    return parse


def _case(text):
    for c in QuantileCase:
        if c.value.lower() == text.lower():
            return c
    raise argparse.ArgumentTypeError(f"unknown case {text!r}; valid: {', '.join(c.value for c in QuantileCase)}")


def _plot_case(text):
    if text.lower() == "raw":
        return None
    for c in PlotCase:
        if c.value.lower() == text.lower():
            return c
    raise argparse.ArgumentTypeError(f"unknown case {text!r}; valid: raw, {', '.join(c.value for c in PlotCase)}")


def _param(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a numeric value") from None


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


def _column(text):
    return int(text) if text.isdigit() else text


def _resolve_seed(args) -> Seed:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % 2**63)
        print(f"note: no --seed given; using {args.seed}", file=sys.stderr)
    return Seed(args.seed)


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(ENV_THREADS)
    return int(env) if env else None


def _provider(args) -> tuple[QuantileProvider, dict]:
    table_path = args.table or os.environ.get(ENV_TABLE)
    if table_path:
        table = QuantileTable.load(table_path)
        return QuantileProvider(table=table), {"table": str(table_path), "entries": len(table)}
    seed = _resolve_seed(args)
    prov = QuantileProvider(
        replicates=args.replicates,
        grid_m=args.grid_m,
        seed=seed,
        cache_path=args.quantile_cache,
        threads=_threads(args),
    )
    return prov, {"monte_carlo": {"replicates": args.replicates, "grid_m": args.grid_m, "seed": seed.as_dict()}}


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_svg(doc, path: str) -> None:
    from .plotting import render_svg

    Path(path).write_text(render_svg(doc), encoding="utf-8")


def _load_sample(args):
    return sort_descending(read_column(args.input, args.column))


# ------------------------------------------------------------ subcommands


def cmd_meplot(args) -> int:
    s = _load_sample(args)
    if args.case is None:
        pts = me_plot_raw(s)
        _emit(write_csv(None, ("x", "y"), pts), args.output)
        doc_args = dict(plot=None, raw_points=pts)
    else:
        if args.k is None:
            raise UsageError("--k is required for a scaled plot")
        eps = args.eps
        if args.case is PlotCase.WEIBULL and args.all_points:
            eps = None
        plot = scaled_plot(s, args.case, args.k, eps)
        rows = zip(plot.index, plot.x, plot.y)
        _emit(write_csv(None, ("index", "x", "y"), rows), args.output)
        doc_args = dict(plot=plot)
    if args.svg:
        from .plotting import me_plot_document

        _write_svg(me_plot_document(title=f"ME plot of {Path(args.input).name}", **doc_args), args.svg)
    return 0


def cmd_detect(args) -> int:
    s = _load_sample(args)
    provider, source = _provider(args)
    cfg = DetectConfig(
        k=args.k,
        eps=args.eps,
        alpha=args.alpha,
        report_alphas=tuple(a for a in args.report_alpha if a != args.alpha),
        method=args.method,
        gumbel_threshold=args.gumbel_threshold,
        coverage_threshold=args.coverage_threshold,
        rule=args.rule,
        case=args.case,
        quantiles=provider,
    )
    verdict = detect(s, cfg)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "verdict",
        "input": {"path": str(args.input), "column": args.column, "n": s.n},
        "config": {
            "k": cfg.k,
            "eps": cfg.eps,
            "alpha": cfg.alpha,
            "alphas": cfg.alphas,
            "method": Method.parse(cfg.method).value,
            "gumbel_threshold": cfg.gumbel_threshold,
            "coverage_threshold": cfg.coverage_threshold,
            "rule": cfg.rule,
            "case": None if cfg.case is None else QuantileCase(cfg.case).value,
        },
        "quantile_source": source,
        **verdict.as_dict(),
    }
    _emit(write_json(None, doc), args.output)
    if args.svg:
        from .plotting import me_plot_document

        shown = [r for r in verdict.tested_cases if r.band is not None]
        if verdict.selected != "Inconclusive":
            shown = [r for r in shown if r.case.plot_case.value == verdict.selected] or shown
        if shown:
            case = shown[0].case
            rs = [r for r in shown if r.case is case]
            title = f"{case.value} band, k={cfg.k}, eps={cfg.eps:g}: {verdict.selected}"
            _write_svg(me_plot_document(rs[0].band.plot, [r.band for r in rs], rs[0].line, title), args.svg)
        else:
            log.warning("no band could be built; SVG not written")
    return 0


def _grid_requests(args) -> list[QuantileRequest]:
    seed = _resolve_seed(args)
    reqs = []
    for case in args.case or []:
        xis = [0.0] if case is QuantileCase.GUMBEL else args.xi
        if not xis:
            raise UsageError(f"--xi is required for case {case.value}")
        for xi in xis:
            for eps in args.eps:
                for alpha in args.alpha:
                    reqs.append(QuantileRequest(case, xi, eps, alpha, args.replicates, args.grid_m, seed))
    return list({r.key: r for r in reqs}.values())


def cmd_quantiles(args) -> int:
    reqs = _grid_requests(args)
    table = table_build(reqs, _threads(args)) if reqs else QuantileTable()
    _emit(table.to_json(), args.output)
    for key in sorted(table.entries):
        r = table.entries[key]
        c = "-" if r.c is None else format_number(r.c)
        print(f"{r.case.value} xi={r.xi:g} eps={r.eps:g} alpha={r.alpha:g}: c={c} d={format_number(r.d)}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    x = sample_family(args.family, dict(args.param), args.n, seed)
    _emit(write_csv(None, ("value",), ((v,) for v in x)), args.output)
    if args.meta:
        write_json(
            args.meta,
            {
                "format_version": FORMAT_VERSION,
                "kind": "simulation",
                "family": args.family.value,
                "params": dict(args.param),
                "n": args.n,
                "seed": seed.as_dict(),
            },
        )
    return 0


def cmd_coverage(args) -> int:
    provider, source = _provider(args)
    seed = _resolve_seed(args)
    cfg = ExperimentConfig(
        family=args.family,
        params=dict(args.param),
        n=args.n,
        replications=args.replications,
        ks=args.k,
        eps_values=args.eps,
        alphas=args.alpha,
        estimator=args.estimator,
        case=args.case,
        seed=seed,
        rule=args.rule,
        threshold=args.coverage_threshold,
        quantiles=provider,
    )
    report = run_coverage(cfg)
    if args.rows:
        write_csv(args.rows, ("family",) + tuple(report.rows[0].FIELDS) if report.rows else ("family",),
                  ((cfg.family.value,) + r.values() for r in report.rows))
    summary = report.summary(timing=args.timing)
    summary["quantile_source"] = source
    _emit(write_json(None, summary), args.output)
    return 0


def cmd_preprocess(args) -> int:
    dates, values = read_dated_series(args.input, args.date_column, args.value_column)
    ts = TimeSeries.from_observations(dates, values)
    res = run_pipeline(ts, args.max_order)
    p = res.model.order
    rows = (
        (d.isoformat(), res.imputed.values[i], res.deseasonalized.values[i], res.residuals[i - p] if i >= p else None)
        for i, d in enumerate(ts.timestamps)
    )
    _emit(write_csv(None, ("date", "imputed", "deseasonalized", "residual"), rows), args.output)
    if args.residuals:
        write_csv(args.residuals, ("residual",), ((v,) for v in res.residuals))
    meta = {"format_version": FORMAT_VERSION, "kind": "preprocess", "input": str(args.input), **res.metadata()}
    if args.meta:
        write_json(args.meta, meta)
    else:
        print(json.dumps(meta["ar_model"], sort_keys=True), file=sys.stderr)
    return 0


def cmd_figures(args) -> int:
    from .plotting import bundle_documents, render_svg

    provider, source = _provider(args)
    seed = Seed(args.seed) if args.seed is not None else provider.seed
    bundle = reproduce_figures(args.preset, seed, args.n, provider)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, path in bundle.estimator_paths.items():
        write_csv(out / f"estimator_{name}.csv", ("k", "xi"), zip(path.ks, path.values))
    for p in bundle.panels:
        stem = f"panel_k{p.k}_eps{p.eps:g}"
        write_csv(out / f"{stem}_points.csv", ("index", "x", "y"), zip(p.plot.index, p.plot.x, p.plot.y))
        write_csv(out / f"{stem}_line.csv", ("x", "y"), [(x, float(p.line(x))) for x in (p.line.x_start, p.line.x_end)])
        for a, band in sorted(p.bands.items()):
            write_csv(
                out / f"{stem}_band_alpha{a:g}.csv",
                ("index", "x_lo", "x_hi", "y_lo", "y_hi"),
                zip(p.plot.index, band.x_lo, band.x_hi, band.y_lo, band.y_hi),
            )
    meta = bundle.metadata()
    meta["quantile_source"] = source
    write_json(out / "bundle.json", meta)
    if args.svg:
        for name, doc in bundle_documents(bundle).items():
            (out / f"{name}.svg").write_text(render_svg(doc), encoding="utf-8")
    print(str(out), file=sys.stderr)
    return 0


# ----------------------------------------------------------------- parser


def _add_quantile_source(p) -> None:
    g = p.add_argument_group("quantile source")
    g.add_argument("--table", help=f"quantile table JSON (env {ENV_TABLE}); without it quantiles are simulated")
    g.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES, help="Monte-Carlo replicates")
    g.add_argument("--grid-m", type=int, default=DEFAULT_GRID_M, help="bridge grid size")
    g.add_argument("--quantile-cache", help="JSON file caching simulated quantiles between runs")
    g.add_argument("--seed", type=_seed, help="root seed (chosen and reported if omitted)")


def _add_input(p) -> None:
    p.add_argument("input", help="CSV file, or - for stdin")
    p.add_argument("--column", type=_column, default=None, help="column name or 1-based index (default: first)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mebands", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help=f"worker threads (env {ENV_THREADS})")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("meplot", help="raw or case-scaled ME plot as CSV (and SVG)")
    _add_input(p)
    p.add_argument("--case", type=_plot_case, default=None, help="raw (default), Frechet, Gumbel or Weibull")
    p.add_argument("--k", type=int)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--all-points", action="store_true", help="Weibull only: keep indices 2..k")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_meplot)

    p = sub.add_parser("detect", help="estimate xi, test bands, report a domain verdict as JSON")
    _add_input(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--report-alpha", type=float, nargs="*", default=[0.10], help="extra levels to report")
    p.add_argument("--method", type=_choice(Method, "estimator"), default=Method.PICKANDS)
    p.add_argument("--case", type=_case, default=None, help="test only this band case")
    p.add_argument("--gumbel-threshold", type=float, default=0.05)
    p.add_argument("--coverage-threshold", type=float, default=0.95)
    p.add_argument("--rule", choices=("intersect", "center"), default="intersect")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    _add_quantile_source(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("quantiles", help="build a Monte-Carlo quantile table")
    p.add_argument("--case", type=_case, nargs="*", default=[])
    p.add_argument("--xi", type=float, nargs="*", default=[])
    p.add_argument("--eps", type=float, nargs="*", default=[0.2])
    p.add_argument("--alpha", type=float, nargs="*", default=[0.025], help="quantile tail levels (band alpha / 2)")
    p.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    p.add_argument("--grid-m", type=int, default=DEFAULT_GRID_M)
    p.add_argument("--seed", type=_seed)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_quantiles)

    p = sub.add_parser("simulate", help="draw a sample from a simulation family")
    p.add_argument("--family", type=_choice(Family, "family"), required=True)
    p.add_argument("--param", type=_param, action="append", default=[], help="NAME=VALUE (repeatable)")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=_seed)
    p.add_argument("-o", "--output")
    p.add_argument("--meta", help="write sampling metadata JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="finite-sample band coverage study")
    p.add_argument("--family", type=_choice(Family, "family"), required=True)
    p.add_argument("--param", type=_param, action="append", default=[])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--k", type=int, nargs="+", default=[1000])
    p.add_argument("--eps", type=float, nargs="+", default=[0.2])
    p.add_argument("--alpha", type=float, nargs="+", default=[0.05])
    p.add_argument("--estimator", default=TRUE_XI, help="'true' or an estimator name")
    p.add_argument("--case", type=_case, default=None)
    p.add_argument("--rule", choices=("intersect", "center"), default="intersect")
    p.add_argument("--coverage-threshold", type=float, default=0.95)
    p.add_argument("--rows", help="per-replication CSV")
    p.add_argument("--timing", action="store_true", help="include wall-clock times (not reproducible)")
    p.add_argument("-o", "--output")
    _add_quantile_source(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("preprocess", help="impute, deseasonalize, AR-filter a daily series")
    p.add_argument("input")
    p.add_argument("--date-column", type=_column, default=1)
    p.add_argument("--value-column", type=_column, default=2)
    p.add_argument("--max-order", type=int, default=40)
    p.add_argument("-o", "--output")
    p.add_argument("--residuals", help="residual-only CSV (a sample for meplot/detect)")
    p.add_argument("--meta", help="JSON metadata (AR order, imputed dates)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("figures", help="figure bundle for a simulation preset")
    p.add_argument("--preset", type=_choice(Preset, "preset"), required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--outdir", required=True)
    p.add_argument("--svg", action="store_true")
    _add_quantile_source(p)
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "coverage" and args.estimator != TRUE_XI:
        try:
            Method.parse(args.estimator)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except MEBandsError as exc:
        _diagnostic(exc.kind, str(exc), exc.exit_code, args.command)
        return exc.exit_code
    except OSError as exc:
        _diagnostic("IoError", str(exc), 3, args.command)
        return 3
    except ValueError as exc:
        _diagnostic("InvalidInput", str(exc), 3, args.command)
        return 3


def _diagnostic(kind: str, message: str, code: int, command: str) -> None:
    doc = {"error": kind, "message": message, "exit_code": code, "command": command}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
