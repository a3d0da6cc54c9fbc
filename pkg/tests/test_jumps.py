import math

import mpmath
import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from momentvar.errors import InvalidInputError, MissingDataError
from momentvar.jumps import (
    JumpCorrection,
    exp_remainder,
    expected_c3,
    expected_c4,
    expected_h,
    j2_correction,
    j3_correction,
    j3_integrand,
    j4_correction,
    j4_integrand,
    jump_corrections,
)
from momentvar.simulation import HestonSpec, JumpSpec, PathEnsemble, simulate_heston

mpmath.mp.dps = 50
BASE = HestonSpec(mu=0.0, kappa=2.0, theta=0.04, sigma=0.4, rho=-0.7)


def mp_remainder(x, n):
    x = mpmath.mpf(x)
    return float(mpmath.exp(x) - sum(x**k / mpmath.factorial(k) for k in range(n + 1)))


def mp_j3(x, r):
    x, r = mpmath.mpf(x), mpmath.mpf(r)
    e = mpmath.exp(x)
    return float(r * (1 + x + x**2 / 2 - e) + (1 + x + x**2 / 2 + x**3 / 4 - e))


def mp_j4(x, r):
    x, r = mpmath.mpf(x), mpmath.mpf(r)
    e = mpmath.exp(x)
    return float(
        r**2 * (1 + x + x**2 / 2 - e)
        + 2 * r * (1 + x + x**2 / 2 + x**3 / 4 - e)
        + 2 * (1 + x + x**2 / 2 + x**3 / 6 + x**4 / 16 - e)
    )


XS = [-2.0, -0.7, -0.49, -0.1, -1e-3, -1e-6, 1e-8, 1e-4, 0.05, 0.3, 0.5, 1.5]


class TestIntegrands:
    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("x", XS)
    def test_exp_remainder(self, x, n):
        assert exp_remainder(x, n) == pytest.approx(mp_remainder(x, n), rel=1e-13)

    @pytest.mark.parametrize("x", XS)
    @pytest.mark.parametrize("r", [-0.3, 0.0, 0.12])
    def test_against_high_precision(self, x, r):
        assert j3_integrand(x, r) == pytest.approx(mp_j3(x, r), rel=1e-11, abs=1e-300)
        assert j4_integrand(x, r) == pytest.approx(mp_j4(x, r), rel=1e-11, abs=1e-300)

    def test_taylor_limits(self):
        x = 1e-3
        assert abs(j3_integrand(x, 0.0) / x**3 - 1 / 12) < 1e-3
        assert abs((j3_integrand(x, 1.0) - j3_integrand(x, 0.0)) / x**3 + 1 / 6) < 1e-3
        assert abs(j4_integrand(x, 0.0) / x**4 - 1 / 24) < 1e-3

    def test_vectorized(self):
        x = np.array([-0.1, 0.0, 0.2])
        out = j3_integrand(x, np.array([0.0, 0.1, -0.1]))
        assert out.shape == (3,)
        assert out[1] == 0.0

    @pytest.mark.parametrize("x", [1e-2, 1e-3, 1e-4])
    def test_third_order(self, x):
        # the bracket vanishes to third order: halving x divides it by ~8
        ratio = j3_integrand(x, 0.05) / j3_integrand(x / 2, 0.05)
        assert ratio == pytest.approx(8.0, rel=0.05)


def normal_expectation(f, m, s):
    if s == 0:
        return f(m)
    lo, hi = m - 12 * s, m + 12 * s
    return integrate.quad(lambda x: f(x) * norm.pdf(x, m, s), lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]


class TestClosedForms:
    LAWS = [(-0.1, 0.05), (0.02, 0.01), (0.0, 0.3), (-0.5, 0.25), (0.003, 0.0), (1e-4, 2e-4)]

    @pytest.mark.parametrize("m, s", LAWS)
    def test_expected_h(self, m, s):
        ref = normal_expectation(lambda x: float(mp_j3(x, 1.0) - mp_j3(x, 0.0)), m, s)
        assert expected_h(JumpSpec(1.0, m, s)) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("m, s", LAWS)
    def test_expected_c3(self, m, s):
        ref = normal_expectation(lambda x: mp_j3(x, 0.0), m, s)
        assert expected_c3(JumpSpec(1.0, m, s)) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("m, s", LAWS)
    def test_expected_c4(self, m, s):
        ref = normal_expectation(lambda x: mp_j4(x, 0.0) / 2, m, s)
        assert expected_c4(JumpSpec(1.0, m, s)) == pytest.approx(ref, rel=1e-8)

    def test_j2(self):
        js = JumpSpec(2.0, -0.1, 0.05)
        ref = 2 * 2.0 * 0.5 * (1 - 0.1 + (0.01 + 0.0025) / 2 - math.exp(-0.1 + 0.00125))
        assert j2_correction(js, 0.5) == pytest.approx(ref, rel=1e-12)
        assert j2_correction(JumpSpec(0.0), 0.5) == 0.0
        with pytest.raises(InvalidInputError):
            j2_correction(js, 0.0)


@pytest.fixture(scope="module")
def jump_ensemble():
    js = JumpSpec(5.0, -0.05, 0.025)
    ens = simulate_heston(BASE, js, n_paths=20_000, n_steps=63, horizon_T=0.25, seed=8, store_paths=False)
    return js, ens


class TestCorrections:
    def test_monte_carlo_matches_analytic(self, jump_ensemble):
        js, ens = jump_ensemble
        mc = jump_corrections(js, ens, "monte_carlo")
        an = jump_corrections(js, ens, "analytic_moments")
        se3, se4 = mc.mc_stderr
        assert abs(mc.j3 - an.j3) <= 4 * se3
        assert abs(mc.j4 - an.j4) <= 4 * se4
        assert mc.j2 == an.j2

    def test_signs_for_crash_jumps(self, jump_ensemble):
        js, ens = jump_ensemble
        jc = jump_corrections(js, ens)
        assert jc.j3 < 0 < jc.j4
        assert jc.j2 > 0

    def test_no_jumps_recorded(self):
        ens = simulate_heston(BASE, None, n_paths=50, n_steps=5, horizon_T=0.1, seed=1)
        assert j3_correction(JumpSpec(1.0, 0.1, 0.1), ens) == (0.0, 0.0)
        assert j4_correction(JumpSpec(0.0), ens, "analytic_moments") == (0.0, None)

    def test_missing_records(self):
        ens = PathEnsemble.from_paths(np.zeros((3, 4)), 0.1)
        with pytest.raises(MissingDataError):
            j3_correction(JumpSpec(1.0, 0.0, 0.1), ens)

    def test_unknown_method(self, jump_ensemble):
        js, ens = jump_ensemble
        with pytest.raises(InvalidInputError):
            j3_correction(js, ens, method="quadrature")

    def test_stderr_only_for_monte_carlo(self):
        with pytest.raises(InvalidInputError):
            JumpCorrection(0.0, 0.0, 0.0, "analytic_moments", (0.1, 0.1))
        with pytest.raises(InvalidInputError):
            JumpCorrection(0.0, 0.0, 0.0, "monte_carlo", None)

    def test_order_three_in_jump_scale(self, jump_ensemble):
        # positive-mean law: the x^4 term opposes x^3, so use small scales
        js = JumpSpec(5.0, 0.05, 0.025)
        _, ens = jump_ensemble
        scales = np.array([0.1, 0.05, 0.025, 0.0125])
        j3 = [abs(j3_correction(js.scaled(s), ens, "analytic_moments")[0]) for s in scales]
        slope = np.polyfit(np.log(scales), np.log(j3), 1)[0]
        assert slope == pytest.approx(3.0, abs=0.1)


def test_expected_variations_decompose():
    """Realized expectation = option-implied part + jump correction (risk-neutral, r = 0)."""
    js = JumpSpec(3.0, -0.08, 0.06)
    mu = -js.intensity * math.expm1(js.jump_mean + 0.5 * js.jump_sd**2)  # makes e^R a martingale
    spec = HestonSpec(mu=mu, kappa=2.0, theta=0.04, sigma=0.4, rho=-0.7)
    ens = simulate_heston(spec, js, n_paths=60_000, n_steps=50, horizon_T=0.25, seed=3, store_paths=False)
    r = ens.terminal
    # model-free option parts for r = 0, evaluated on the terminal law
    implied_qv = 2 * np.mean(np.expm1(r) - r)
    implied_tmv = 4 * np.mean(np.expm1(r) - r - r**2 / 2)
    implied_fmv = 16 * np.mean(np.expm1(r) - r - r**2 / 2 - r**3 / 6)
    jc = jump_corrections(js, ens)
    a = ens.accum
    assert a.realized_qv.mean() == pytest.approx(implied_qv + jc.j2, rel=0.02)
    assert a.realized_tmv.mean() == pytest.approx(implied_tmv + jc.j3, rel=0.03)
    assert a.realized_fmv.mean() == pytest.approx(implied_fmv + jc.j4, rel=0.03)
    # and the corrections are not negligible at this jump size
    assert abs(jc.j3) > 0.1 * abs(implied_tmv)
