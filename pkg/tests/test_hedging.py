import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from momentvar.errors import DegenerateSampleError, InvalidInputError
from momentvar.hedging import (
    build_hedged,
    fit_hedge,
    hedge_report,
    normal_plotting_quantiles,
    optimize_weight,
    qq_pairs,
    qq_rmse,
)
from momentvar.simulation import HestonSpec, simulate_heston


class TestQQ:
    def test_plotting_positions(self):
        q = normal_plotting_quantiles(4)
        np.testing.assert_allclose(q, stats.norm.ppf([0.125, 0.375, 0.625, 0.875]))

    def test_quantile_sample_scores_near_zero(self):
        x = 2.0 + 3.0 * normal_plotting_quantiles(500)
        # only the ddof=1 scale mismatch remains
        assert qq_rmse(x) < 0.01

    def test_pairs_sorted(self):
        x = np.random.default_rng(1).standard_normal(50)
        theo, emp = qq_pairs(x)
        assert np.all(np.diff(emp) >= 0) and np.all(np.diff(theo) > 0)

    @given(st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.floats(-1e3, 1e3))
    def test_affine_equivariance(self, a, b):
        x = np.random.default_rng(7).standard_t(4, size=200)
        assert qq_rmse(a * x + b) == pytest.approx(abs(a) * qq_rmse(x), rel=1e-6)

    def test_fat_tails_score_worse(self):
        rng = np.random.default_rng(2)
        assert qq_rmse(rng.standard_t(3, 5000)) > qq_rmse(rng.standard_normal(5000))

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            qq_rmse(np.arange(9.0))

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            qq_rmse(np.ones(20))

    def test_non_finite(self):
        x = np.arange(20.0)
        x[3] = np.nan
        with pytest.raises(InvalidInputError):
            qq_rmse(x)


class TestWeights:
    def test_recovers_known_weight(self):
        rng = np.random.default_rng(3)
        v = rng.normal(-1e-3, 5e-4, 20_000)
        r = 0.01 + 40.0 * v + rng.normal(0, 0.005, v.size)
        fit = fit_hedge(r, v, "tmv")
        assert fit.weight == pytest.approx(40.0, abs=4 * fit.se1)
        assert fit.response_kind == "raw_return"

    def test_independent_noise_gives_small_weight(self):
        rng = np.random.default_rng(4)
        v, r = rng.normal(size=5000), rng.normal(size=5000)
        fit = fit_hedge(r, v, "fmv")
        assert abs(fit.weight) < 4 * fit.se1
        assert fit.response_kind == "abs_return"

    def test_fmv_uses_return_sign(self):
        h = build_hedged([0.1, -0.1], [0.02, 0.02], 1.0, "fmv", fixed_leg=0.01)
        np.testing.assert_allclose(h.hedged_returns, [0.09, -0.09])
        t = build_hedged([0.1, -0.1], [0.02, 0.02], 1.0, "tmv", fixed_leg=0.01)
        np.testing.assert_allclose(t.hedged_returns, [0.09, -0.11])

    def test_rejects_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            build_hedged([0.1], [0.1], 1.0, "qv")

    def test_rejects_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            fit_hedge([0.1, 0.2, 0.3], [0.1, 0.2], "tmv")


@pytest.fixture(scope="module")
def skewed():
    spec = HestonSpec(mu=0.05, kappa=4.0, theta=0.09, sigma=0.4, rho=-0.9)
    ens = simulate_heston(spec, n_paths=20_000, n_steps=120, horizon_T=30 / 252, seed=11, store_paths=False)
    return ens.terminal, ens.accum.realized_tmv, ens.accum.realized_fmv


class TestOnSimulatedReturns:
    def test_search_never_worse_than_regression(self, skewed):
        r, tmv, fmv = skewed
        for kind, v in (("tmv", tmv), ("fmv", fmv)):
            s = optimize_weight(r, v, kind)
            assert s.rmse <= s.regression_rmse
            assert s.rmse == pytest.approx(qq_rmse(build_hedged(r, v, s.weight, kind).hedged_returns))

    def test_tmv_hedge_reduces_skew(self, skewed):
        r, tmv, _ = skewed
        rep = hedge_report(r, tmv, "tmv")
        assert rep.base_skewness < -0.3
        assert abs(rep.hedged_skewness) < abs(rep.base_skewness)
        assert rep.hedged_qq_rmse < rep.base_qq_rmse

    def test_fmv_optimal_hedge_improves_fit(self, skewed):
        r, _, fmv = skewed
        rep = hedge_report(r, fmv, "fmv")
        assert rep.search.rmse < rep.base_qq_rmse
        d = rep.to_dict()
        assert d["fit"]["variation_kind"] == "fmv" and "weight" in d["search"]
