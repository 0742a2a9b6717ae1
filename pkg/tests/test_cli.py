import datetime as dt
import json

import numpy as np
import pytest

from mebands.cli import main
from mebands.fileio import read_column

FAST = ["--replicates", "2000", "--grid-m", "1024", "--seed", "11"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def diagnostic(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture
def four(tmp_path):
    p = tmp_path / "four.csv"
    p.write_text("4\n3\n2\n1\n")
    return p


@pytest.fixture(scope="module")
def samples(tmp_path_factory):
    d = tmp_path_factory.mktemp("samples")
    out = {}
    for name, fam, seed in (("gpd", "GPD --param xi=-0.5", 7), ("exp", "Exponential", 0)):
        path = d / f"{name}.csv"
        assert main(["simulate", "--family", *fam.split(), "--n", "10000", "--seed", str(seed), "-o", str(path)]) == 0
        out[name] = path
    return out


class TestMeplot:
    def test_raw(self, capsys, four):
        code, out, _ = run(capsys, "meplot", four)
        assert code == 0
        assert out.splitlines() == ["x,y", "3,1", "2,1.5", "1,2"]

    def test_scaled(self, capsys, samples):
        code, out, _ = run(capsys, "meplot", samples["gpd"], "--case", "Weibull", "--k", "100")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "index,x,y"
        assert len(lines) == 1 + 100 - 20 + 1
        code, out, _ = run(capsys, "meplot", samples["gpd"], "--case", "weibull", "--k", "100", "--all-points")
        assert len(out.splitlines()) == 1 + 99

    def test_scaled_needs_k(self, capsys, four):
        with pytest.raises(SystemExit) as e:
            main(["meplot", str(four), "--case", "Gumbel"])
        assert e.value.code == 2

    def test_empty_file(self, capsys, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        code, _, err = run(capsys, "meplot", p)
        assert code == 3 and diagnostic(err)["error"] == "ParseError"

    def test_non_numeric_names_line(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1\n2\nabc\n4\n")
        code, _, err = run(capsys, "meplot", p)
        d = diagnostic(err)
        assert code == 3 and d["error"] == "ParseError" and "line 3" in d["message"]

    def test_non_finite(self, capsys, tmp_path):
        p = tmp_path / "inf.csv"
        p.write_text("1\ninf\n3\n")
        code, _, err = run(capsys, "meplot", p)
        assert code == 3 and diagnostic(err)["error"] == "NonFiniteValue"

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "meplot", tmp_path / "nope.csv")
        assert code == 3 and diagnostic(err)["error"] == "IoError"

    def test_named_column(self, capsys, tmp_path):
        p = tmp_path / "named.csv"
        p.write_text("# comment\nid,value\n1,4\n2,3\n3,2\n4,1\n")
        code, out, _ = run(capsys, "meplot", p, "--column", "value")
        assert code == 0 and out.splitlines()[1:] == ["3,1", "2,1.5", "1,2"]
        code, out2, _ = run(capsys, "meplot", p, "--column", "2")
        assert out2 == out

    def test_svg_deterministic(self, capsys, samples, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        for path in (a, b):
            assert run(capsys, "meplot", samples["exp"], "--case", "Gumbel", "--k", "200", "--svg", path)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().lstrip().startswith("<?xml")


class TestDetect:
    def test_weibull(self, capsys, samples):
        code, out, _ = run(capsys, "detect", samples["gpd"], "--k", "1000", *FAST)
        doc = json.loads(out)
        assert code == 0 and doc["selected"] == "Weibull" and doc["kind"] == "verdict"
        assert doc["quantile_source"]["monte_carlo"]["seed"]["root"] == 11
        assert {c["alpha"] for c in doc["tested_cases"]} == {0.05, 0.1}

    def test_gumbel(self, capsys, samples):
        code, out, _ = run(capsys, "detect", samples["exp"], "--k", "1000", *FAST)
        doc = json.loads(out)
        assert code == 0 and doc["selected"] == "Gumbel"
        assert abs(doc["xi_hat"]) <= 0.05

    def test_too_few_points(self, capsys, tmp_path):
        p = tmp_path / "two.csv"
        p.write_text("1\n2\n")
        code, _, err = run(capsys, "detect", p, "--k", "1", *FAST)
        assert code != 0 and diagnostic(err)["error"] == "TooFewPoints"

    def test_svg_two_shades(self, capsys, samples, tmp_path):
        svg = tmp_path / "d.svg"
        assert run(capsys, "detect", samples["gpd"], "--k", "1000", "--svg", svg, *FAST)[0] == 0
        text = svg.read_text()
        assert "#a6cee3" in text and "#1f4e9c" in text and "#d62728" in text

    def test_seed_reported(self, capsys, samples, tmp_path):
        code, out, err = run(capsys, "detect", samples["gpd"], "--k", "1000", "--replicates", "1000", "--grid-m", "256")
        assert code == 0 and "no --seed given" in err
        seed = json.loads(out)["quantile_source"]["monte_carlo"]["seed"]["root"]
        assert str(seed) in err


class TestQuantiles:
    ARGS = ["quantiles", "--case", "Weibull", "--xi", "-0.5", "--replicates", "1000", "--grid-m", "256", "--seed", "3"]

    def test_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, *self.ARGS, "-o", a)[0] == 0
        assert run(capsys, *self.ARGS, "-o", b)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        doc = json.loads(a.read_text())
        assert doc["format_version"] == 1 and len(doc["entries"]) == 1

    def test_table_feeds_detect(self, capsys, samples, tmp_path, monkeypatch):
        # Pickands on the seed-7 GPD sample gives xi_hat = -0.445 at k = 1000
        table = tmp_path / "t.json"
        args = ["quantiles", "--case", "Weibull", "--xi", "-0.445", "--alpha", "0.025", "0.05",
                "--replicates", "1000", "--grid-m", "256", "--seed", "3", "-o", table]
        assert run(capsys, *args)[0] == 0
        monkeypatch.setenv("MEBANDS_TABLE", str(table))
        code, out, _ = run(capsys, "detect", samples["gpd"], "--k", "1000")
        doc = json.loads(out)
        assert code == 0 and doc["quantile_source"] == {"table": str(table), "entries": 2}
        assert all("error" not in c for c in doc["tested_cases"])
        # a table lacking the needed key reports a per-case error
        monkeypatch.setenv("MEBANDS_TABLE", str(table))
        code, out, _ = run(capsys, "detect", samples["gpd"], "--k", "1000", "--eps", "0.3")
        doc = json.loads(out)
        assert code == 0 and doc["selected"] == "Inconclusive"
        assert all(c.get("error") for c in doc["tested_cases"])

    def test_incompatible_case(self, capsys):
        code, _, err = run(capsys, "quantiles", "--case", "FrechetFiniteVar", "--xi", "0.5", "--seed", "1")
        assert code == 4 and diagnostic(err)["error"] == "IncompatibleCase"

    def test_empty_grid(self, capsys):
        code, out, _ = run(capsys, "quantiles", "--seed", "1")
        doc = json.loads(out)
        assert code == 0 and doc["entries"] == [] and doc["format_version"] == 1


class TestSimulate:
    def test_identical(self, capsys):
        outs = [run(capsys, "simulate", "--family", "Beta", "--n", "50", "--seed", "4")[1] for _ in range(2)]
        assert outs[0] == outs[1] and outs[0].startswith("value\n")

    def test_round_trip(self, capsys, tmp_path):
        from mebands.stochastic import Seed, sample_family

        p = tmp_path / "s.csv"
        assert run(capsys, "simulate", "--family", "Lognormal", "--n", "200", "--seed", "9", "-o", p)[0] == 0
        np.testing.assert_array_equal(read_column(p), sample_family("Lognormal", {}, 200, Seed(9)))

    def test_meta(self, capsys, tmp_path):
        m = tmp_path / "m.json"
        run(capsys, "simulate", "--family", "gpd", "--param", "xi=-0.5", "--n", "5", "--seed", "1", "--meta", m)
        meta = json.loads(m.read_text())
        assert meta["family"] == "GPD" and meta["params"] == {"xi": -0.5} and meta["seed"]["root"] == 1

    def test_bad_param(self, capsys):
        code, _, err = run(capsys, "simulate", "--family", "GPD", "--param", "shape=1", "--n", "5", "--seed", "1")
        assert code == 4 and diagnostic(err)["error"] == "BadParam"

    def test_unknown_family(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["coverage", "--family", "Cauchy", "--seed", "1"])
        assert e.value.code == 2
        assert "Exponential" in capsys.readouterr().err


class TestCoverage:
    ARGS = ["coverage", "--family", "GPD", "--param", "xi=-0.5", "--n", "4000", "--replications", "5",
            "--k", "400", "--alpha", "0.05", "0.1", *FAST]

    def test_deterministic(self, capsys, tmp_path):
        r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        c1, o1, _ = run(capsys, *self.ARGS, "--rows", r1)
        c2, o2, _ = run(capsys, *self.ARGS, "--rows", r2)
        assert c1 == c2 == 0 and o1 == o2
        assert r1.read_bytes() == r2.read_bytes()
        doc = json.loads(o1)
        assert doc["kind"] == "coverage_report" and len(doc["cells"]) == 2
        assert "wall_clock_s" not in doc["cells"][0]
        header = r1.read_text().splitlines()[0]
        assert header == "family,replication,k,eps,alpha,case,xi_used,covered_fraction,center_fraction,pass,outcome"

    def test_timing(self, capsys):
        _, out, _ = run(capsys, *self.ARGS, "--timing")
        assert "wall_clock_s" in json.loads(out)["cells"][0]

    def test_unknown_estimator(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(self.ARGS + ["--estimator", "Bogus"])
        assert e.value.code == 2


def write_daily(path, years=2, gap=None):
    rng = np.random.default_rng(0)
    start = dt.date(2001, 1, 1)
    lines = ["date,value"]
    n = 365 * years
    x = 0.0
    for i in range(n):
        x = 0.6 * x + rng.normal()
        d = start + dt.timedelta(days=i)
        v = "NA" if gap is not None and i in gap else f"{(2 + np.sin(2 * np.pi * i / 365)) * x:.6f}"
        lines.append(f"{d.isoformat()},{v}")
    path.write_text("\n".join(lines) + "\n")


class TestPreprocess:
    def test_pipeline(self, capsys, tmp_path):
        src, res, meta = tmp_path / "d.csv", tmp_path / "r.csv", tmp_path / "m.json"
        write_daily(src, years=3, gap={40, 41, 500})
        code, out, _ = run(capsys, "preprocess", src, "--max-order", "10", "--residuals", res, "--meta", meta)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "date,imputed,deseasonalized,residual" and len(lines) == 1 + 1095
        m = json.loads(meta.read_text())
        assert m["imputed_dates"] == ["2001-02-10", "2001-02-11", "2002-05-16"]
        assert len(read_column(res)) == 1095 - m["ar_model"]["order"]
        assert 1 <= m["ar_model"]["order"] <= 10

    def test_two_years_with_gap(self, capsys, tmp_path):
        # the only donor year is copied, leaving that calendar day constant
        src = tmp_path / "d.csv"
        write_daily(src, gap={40})
        code, _, err = run(capsys, "preprocess", src)
        assert code == 4 and diagnostic(err)["error"] == "ZeroDayVariance"

    def test_unimputable(self, capsys, tmp_path):
        src = tmp_path / "d.csv"
        write_daily(src, gap={40, 405})
        code, _, err = run(capsys, "preprocess", src)
        assert code == 3 and diagnostic(err)["error"] == "UnimputableDay"

    def test_one_year(self, capsys, tmp_path):
        src = tmp_path / "d.csv"
        write_daily(src, years=1)
        code, _, err = run(capsys, "preprocess", src)
        assert code == 3 and diagnostic(err)["error"] == "InsufficientYears"


def test_figures(capsys, tmp_path):
    code, _, _ = run(capsys, "figures", "--preset", "Exp1", "--n", "10000", "--outdir", tmp_path, *FAST)
    assert code == 0
    meta = json.loads((tmp_path / "bundle.json").read_text())
    assert meta["case"] == "Gumbel" and len(meta["panels"]) == 4
    assert (tmp_path / "estimator_Pickands.csv").exists()
    assert (tmp_path / "panel_k800_eps0.2_band_alpha0.05.csv").exists()


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("MEBANDS_THREADS", "2")
    code, out, _ = run(capsys, "quantiles", "--case", "Gumbel", "--replicates", "1000", "--grid-m", "256", "--seed", "3")
    monkeypatch.setenv("MEBANDS_THREADS", "1")
    code2, out2, _ = run(capsys, "quantiles", "--case", "Gumbel", "--replicates", "1000", "--grid-m", "256", "--seed", "3")
    assert code == code2 == 0 and out == out2


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0 and "0.1.0" in capsys.readouterr().out
