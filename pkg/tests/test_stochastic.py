import math

import numpy as np
import pytest

from mebands.errors import BadParam, BadXi, GridTooCoarse
from mebands.sample import PlotCase, empirical_me, sort_descending
from mebands.stochastic import (
    BridgePath,
    Family,
    Seed,
    Side,
    StableParams,
    bridge_block,
    brownian_bridge_path,
    family_tail,
    functional_suprema,
    literal_charfn_exponent,
    refine_bridge,
    sample_family,
    sample_gpd,
    sample_stable,
    singular_integral,
    sup_functional,
)


class TestSeed:
    def test_determinism(self):
        a = Seed(42, 3).generator().random(5)
        b = Seed(42, 3).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_stream_independence(self):
        a = Seed(7, 0).generator().standard_normal(100_000)
        b = Seed(7, 1).generator().standard_normal(100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02

    def test_validation(self):
        with pytest.raises(BadParam):
            Seed(-1)
        with pytest.raises(BadParam):
            Seed(2**64)
        assert Seed.coerce({"root": 3, "stream": 4}) == Seed(3, 4)


class TestSamplers:
    def test_gpd_uniform(self):
        x = sample_gpd(-1, 1, 50_000, Seed(1))
        assert x.min() >= 0 and x.max() <= 1
        assert abs(x.mean() - 0.5) < 0.01

    def test_gpd_exponential_mean(self):
        assert abs(sample_gpd(0, 1, 100_000, Seed(2)).mean() - 1) < 0.02

    def test_gpd_support(self):
        x = sample_gpd(-0.5, 1, 100_000, Seed(3))
        assert x.min() >= 0 and x.max() <= 2

    def test_gpd_bad_scale(self):
        with pytest.raises(BadParam):
            sample_gpd(0.1, 0, 10, Seed(1))

    def test_beta_mean(self):
        assert abs(sample_family("Beta", {"a": 2, "b": 2}, 100_000, Seed(4)).mean() - 0.5) < 0.01

    def test_lognormal_median(self):
        assert abs(np.median(sample_family("Lognormal", None, 100_000, Seed(5))) - 1) < 0.05

    def test_exponential_top_decile_me(self):
        s = sort_descending(sample_family("exp", {}, 100_000, Seed(6)))
        for q in (0.9, 0.95, 0.99):
            u = float(np.quantile(s.values, q))
            assert abs(empirical_me(s, u) - 1) < 0.15

    def test_pareto_tail(self):
        x = sample_family("Pareto", {"xi": 0.5}, 200_000, Seed(7))
        assert x.min() >= 1
        assert np.mean(x > 10) == pytest.approx(10**-2, rel=0.1)

    def test_bad_family_and_params(self):
        with pytest.raises(BadParam):
            Family.parse("Cauchy")
        with pytest.raises(BadParam):
            sample_family("Normal", {"sd": 1}, 10, Seed(1))
        with pytest.raises(BadParam):
            sample_family("Beta", {"a": -1}, 10, Seed(1))

    def test_family_tail(self):
        assert family_tail("Beta", {"a": 2, "b": 2}) == (-0.5, PlotCase.WEIBULL)
        assert family_tail("Normal") == (0.0, PlotCase.GUMBEL)
        assert family_tail("GPD", {"xi": 0.25}) == (0.25, PlotCase.FRECHET)


class TestBridge:
    def test_endpoints(self):
        for r in range(5):
            p = brownian_bridge_path(64, Seed(r))
            assert p.values[0] == 0.0 and p.values[-1] == 0.0
            assert p.grid[0] == 0.0 and p.grid[-1] == 1.0 and p.m == 64

    def test_minimum_grid(self):
        with pytest.raises(BadParam):
            brownian_bridge_path(8, Seed(1))

    def test_block_rows_independent_of_block(self):
        full = bridge_block(Seed(9), range(10), 128)
        part = bridge_block(Seed(9), [3, 7], 128)
        np.testing.assert_array_equal(full[[3, 7]], part)

    def test_moments(self):
        paths = bridge_block(Seed(10), range(10_000), 256)
        b = paths[:, 128]
        var, se = b.var(ddof=1), b.var(ddof=1) * math.sqrt(2 / (b.size - 1))
        assert abs(var - 0.25) < 3 * se
        x, y = paths[:, 64], paths[:, 192]
        prod = (x - x.mean()) * (y - y.mean())
        assert abs(prod.mean() - 0.0625) < 3 * prod.std(ddof=1) / math.sqrt(prod.size)

    def test_refine_keeps_nodes(self):
        p = brownian_bridge_path(32, Seed(1))
        q = refine_bridge(p, Seed(2))
        assert q.m == 64
        np.testing.assert_array_equal(q.values[::2], p.values)


class TestStable:
    def test_parameters(self):
        p = StableParams(0.75)
        assert p.index == pytest.approx(4 / 3)
        assert p.skewness == 1 and p.location == 0
        with pytest.raises(BadXi):
            StableParams(0.5)

    @pytest.mark.parametrize("xi", [0.6, 0.75, 0.9])
    def test_literal_formula_is_not_a_cf(self, xi):
        # the printed coefficient has the wrong sign: |phi(1)| > 1
        assert np.real(literal_charfn_exponent(xi, 1.0)) > 0
        assert abs(np.exp(literal_charfn_exponent(xi, 1.0))) > 1
        # the corrected law flips the sign of the whole exponent
        p = StableParams(xi)
        corrected = -p.scale_power * (1 - 1j * math.tan(math.pi * p.index / 2))
        lit = literal_charfn_exponent(xi, 1.0)
        assert corrected == pytest.approx(-lit)
        assert p.cf(1.0) == pytest.approx(np.exp(corrected))

    def test_cf_at_zero(self):
        assert StableParams(0.75).cf(0.0) == 1.0
        x = sample_stable(StableParams(0.75), Seed(1), 1000)
        assert np.mean(np.exp(0j * x)) == 1.0

    def test_empirical_cf_t1(self):
        p = StableParams(0.75)
        x = sample_stable(p, Seed(2), 100_000)
        emp = np.mean(np.exp(1j * x))
        assert abs(emp.real - p.cf(1.0).real) < 0.02
        assert abs(emp.imag - p.cf(1.0).imag) < 0.02

    def test_heavier_tail_for_larger_xi(self):
        q6 = np.quantile(sample_stable(StableParams(0.6), Seed(3), 100_000), 0.999)
        q9 = np.quantile(sample_stable(StableParams(0.9), Seed(3), 100_000), 0.999)
        assert q9 > q6

    def test_scalar_draw(self):
        assert isinstance(sample_stable(StableParams(0.7), Seed(4)), float)


def _zero_path(m=256):
    return BridgePath(np.arange(m + 1) / m, np.zeros(m + 1))


class TestFunctionals:
    @pytest.mark.parametrize(
        "case,xi", [(PlotCase.FRECHET, 0.25), (PlotCase.GUMBEL, 0.0), (PlotCase.WEIBULL, -0.5)]
    )
    @pytest.mark.parametrize("side", list(Side))
    def test_zero_path(self, case, xi, side):
        assert sup_functional(case, side, xi, 0.2, _zero_path()) == 0.0

    def test_frechet_bump(self):
        m, h = 256, 0.7
        v = np.zeros(m + 1)
        v[m // 2] = h
        val = sup_functional("Frechet", "X", 0.25, 0.2, BridgePath(np.arange(m + 1) / m, v))
        assert val >= 0.25 * 0.5 ** (-1.25) * h - 1e-12

    def test_gumbel_y_anchor(self):
        # a path equal to 1 around t = 1/e (integral term vanishes only for the anchor part)
        m = 1000
        t = np.arange(m + 1) / m
        v = np.zeros(m + 1)
        j = int(math.floor(m / math.e))
        v[j] = v[j + 1] = 1.0
        path = BridgePath(t, v)
        sups = sup_functional("Gumbel", "Y", 0.0, 0.5, path)
        integral = singular_integral(v, 0.0)[-1]
        # for t >= 1/2 the integral is constant, so the sup is at t = 1/2
        assert sups == pytest.approx(math.e + integral / 0.5)

    def test_grid_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            sup_functional("Gumbel", "X", 0.0, 0.01, _zero_path(256))

    def test_xi_checks(self):
        p = _zero_path()
        with pytest.raises(BadXi):
            sup_functional("Frechet", "Y", 0.6, 0.2, p)
        with pytest.raises(BadXi):
            sup_functional("Weibull", "X", 0.1, 0.2, p)
        assert sup_functional("Frechet", "X", 0.75, 0.2, p) == 0.0

    def test_product_integration_exact_on_linear_paths(self):
        # B(y) = y(1 - y): int_0^t y^-(1+xi) y (1-y) dy in closed form
        m, xi = 512, 0.3
        t = np.arange(m + 1) / m
        v = t * (1 - t)
        got = singular_integral(v, xi)
        exact = t ** (1 - xi) / (1 - xi) - t ** (2 - xi) / (2 - xi)
        # interpolation error only; the first panel dominates at O(h^(2-xi))
        np.testing.assert_allclose(got, exact, atol=5e-5)
        lin = singular_integral(t.copy(), xi)
        np.testing.assert_allclose(lin, t ** (1 - xi) / (1 - xi), rtol=1e-12, atol=1e-15)

    def test_quadratures_agree_roughly(self):
        p = brownian_bridge_path(4096, Seed(8))
        a = sup_functional("Weibull", "Y", -0.5, 0.2, p, "linear")
        b = sup_functional("Weibull", "Y", -0.5, 0.2, p, "trapezoid")
        assert abs(a - b) < 0.02

    def test_batch_matches_single(self):
        paths = bridge_block(Seed(3), range(8), 512)
        batch = functional_suprema(paths, "Frechet", "Y", 0.25, [0.2, 0.3])
        for r in range(8):
            p = BridgePath(np.arange(513) / 512, paths[r])
            assert batch[0, r] == pytest.approx(sup_functional("Frechet", "Y", 0.25, 0.2, p))
            assert batch[1, r] == pytest.approx(sup_functional("Frechet", "Y", 0.25, 0.3, p))
        assert np.all(batch[1] <= batch[0])

    def test_symmetry_of_bridge(self):
        paths = bridge_block(Seed(4), range(10_000), 1024)
        pos = functional_suprema(paths, "Frechet", "X", 0.25, [0.2])[0]
        neg = functional_suprema(-paths, "Frechet", "X", 0.25, [0.2])[0]
        qp, qn = np.quantile(pos, 0.9), np.quantile(neg, 0.9)
        # bootstrap SE of the 90% quantile
        rng = np.random.default_rng(0)
        boots = [np.quantile(rng.choice(pos, pos.size), 0.9) for _ in range(200)]
        assert abs(qp - qn) < 3 * math.sqrt(2) * np.std(boots)

    def test_y_finite_for_admissible_xi(self):
        paths = bridge_block(Seed(5), range(200), 1024)
        for case, xi in ((PlotCase.FRECHET, 0.45), (PlotCase.WEIBULL, -2.0), (PlotCase.WEIBULL, -0.1)):
            assert np.all(np.isfinite(functional_suprema(paths, case, "Y", xi, [0.2])))


class TestGridRefinement:
    M = 4096

    def _pairs(self, m, n=100):
        for r in range(n):
            p = brownian_bridge_path(m, Seed(500, r))
            yield p, refine_bridge(p, Seed(600, r))

    def test_exact_under_linear_refinement(self):
        from mebands.stochastic import _process

        m = self.M
        for r in range(10):
            p = brownian_bridge_path(m, Seed(500, r))
            v = np.empty(2 * m + 1)
            v[::2] = p.values
            v[1::2] = 0.5 * (p.values[:-1] + p.values[1:])
            a = _process(p.values, PlotCase.GUMBEL, Side.Y, 0.0, 820, "linear")
            b = _process(v, PlotCase.GUMBEL, Side.Y, 0.0, 1640, "linear")[::2]
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)

    def test_converges_under_brownian_refinement(self):
        def mean_gap(m):
            d = [abs(sup_functional("Gumbel", "Y", 0, 0.2, p) - sup_functional("Gumbel", "Y", 0, 0.2, q))
                 for p, q in self._pairs(m)]
            return float(np.mean(d))

        coarse, fine = mean_gap(1024), mean_gap(self.M)
        assert fine < 0.7 * coarse

    @pytest.mark.xfail(strict=True, reason="new Brownian detail between grid points moves the sup by O(sqrt(h)/eps)")
    def test_literal_refinement_bound(self):
        for p, q in self._pairs(self.M):
            a = sup_functional("Gumbel", "Y", 0, 0.2, p, "trapezoid")
            b = sup_functional("Gumbel", "Y", 0, 0.2, q, "trapezoid")
            assert abs(a - b) < 1e-2
