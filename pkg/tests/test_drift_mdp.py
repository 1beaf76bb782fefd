import time
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate
from scipy.stats import gamma as gamma_dist

from hestonis import varopt
from hestonis.drift_bs import bs_beta
from hestonis.drift_mdp import (
    _fbar_curve,
    gamma_moments,
    large_time_constants,
    large_time_problem,
    large_time_scalar,
    mdp_auxiliary,
    mdp_large_time_drift,
    mdp_log_drift,
    mdp_log_objective,
    mdp_log_problem,
    mdp_price_drift,
    mdp_price_problem,
    mdp_small_time_drift,
)
from hestonis.measure import DriftMode
from hestonis.model import EQUITY_PARAMS, psi_deterministic
from hestonis.payoff import PayoffKind, geometric_weight, make_payoff


@pytest.fixture(scope="module")
def alpha():
    return geometric_weight(1.0)


@pytest.fixture(scope="module")
def spec():
    return make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 50.0, 1.0)


class TestAuxiliary:
    def test_integrating_factor_is_linear(self, params, grid, alpha):
        aux = mdp_auxiliary(alpha, params, grid)
        assert_allclose(aux.b_path, -params.kappa * grid.knots, atol=1e-15)
        assert aux.b_path[0] == 0.0 and aux.gamma[0] == 0.0

    def test_gamma_horizon_value_against_quadrature(self, params, grid, alpha):
        aux = mdp_auxiliary(alpha, params, grid)
        ref, _ = integrate.quad(lambda s: np.exp(-2.0 * s) * (1.0 - s), 0.0, 1.0)
        assert aux.gamma_t_end == pytest.approx(ref, abs=1e-5)
        assert aux.gamma_t_end == pytest.approx(0.28383, abs=1e-4)

    def test_u_vanishes_at_horizon(self, params, grid, alpha):
        aux = mdp_auxiliary(alpha, params, grid)
        assert aux.u[-1] == 0.0


class TestLogPriceMode:
    def test_zero_control_value_is_centered_payoff(self, params, grid, alpha, spec):
        val = mdp_log_objective(0.0, 0.0, spec, alpha, params, grid)
        F, _, _ = _fbar_curve(spec, alpha, params, grid)
        assert val == pytest.approx(float(F(0.0)), abs=1e-12)

    def test_eta_start_shifts_argument_only(self, params, grid, alpha, spec):
        v0_ = mdp_log_objective(0.7, 0.0, spec, alpha, params, grid)
        v1 = mdp_log_objective(0.7, 0.3, spec, alpha, params, grid)
        assert v1 != pytest.approx(v0_)

    def test_channel_loadings(self, params, grid, alpha, spec):
        d = mdp_log_drift(spec, alpha, params, grid)
        aux = mdp_auxiliary(alpha, params, grid)
        a = alpha.on_grid(grid)
        sqp = np.sqrt(aux.psi)
        # recover beta from the orthogonal channel, then check channel one
        beta = d.h2_dot[0] / (0.5 * params.rho_bar * a[0] * sqp[0])
        want_h1 = beta * (aux.u + 0.5 * params.rho * a * sqp)
        assert_allclose(d.h1_dot, want_h1, atol=1e-12)
        # reconstruction rho h1 + rho_bar h2 = Z = beta (rho u + alpha sqrt(psi)/2)
        z = beta * (params.rho * aux.u + 0.5 * a * sqp)
        assert np.abs(params.rho * d.h1_dot + params.rho_bar * d.h2_dot - z).max() <= 1e-12

    def test_uncorrelated_channels_decouple(self, grid, alpha, spec):
        p0 = replace(EQUITY_PARAMS, rho=1e-14)
        d = mdp_log_drift(spec, alpha, p0, grid)
        aux = mdp_auxiliary(alpha, p0, grid)
        a = alpha.on_grid(grid)
        beta = d.h2_dot[0] / (0.5 * a[0] * np.sqrt(aux.psi[0]))
        assert_allclose(d.h1_dot, beta * aux.u, atol=1e-12)

    def test_stationarity_of_scale(self, params, grid, alpha, spec):
        from hestonis.drift_mdp import _log_reduction

        _, _, _, _, s1, s2 = _log_reduction(alpha, params, grid)
        d = mdp_log_drift(spec, alpha, params, grid)
        aux = mdp_auxiliary(alpha, params, grid)
        a = alpha.on_grid(grid)
        beta = d.h2_dot[0] / (0.5 * params.rho_bar * a[0] * np.sqrt(aux.psi[0]))
        _, fp, _ = _fbar_curve(spec, alpha, params, grid)
        assert abs(s1 * fp(beta * s1) - beta * s2) <= 1e-9

    def test_oracle_agreement(self, params, grid, alpha, spec):
        d = mdp_log_drift(spec, alpha, params, grid)
        problem = mdp_log_problem(spec, params, grid, alpha=alpha,
                                  extra_atoms=[(d.h1_dot, d.h2_dot)])
        m1 = problem.basis[0].shape[0]
        cfc = np.zeros(problem.n_coeffs)
        cfc[2] = cfc[m1 + 2] = 1.0
        cf = problem.value(cfc)
        _, vv = varopt.solve(problem, init=cfc, budget=2500)
        assert vv >= cf - 1e-6
        assert vv - cf <= 2e-3 * max(1.0, abs(cf))


class TestPriceMode:
    def test_profile_is_weighted_vol_in_both_channels(self, params, grid, alpha, spec):
        d = mdp_price_drift(spec, alpha, params, grid)
        psi = psi_deterministic(params, grid)
        a = alpha.on_grid(grid)
        b = d.h2_dot[0] / (params.rho_bar * a[0] * np.sqrt(psi[0]))
        assert_allclose(d.h1_dot, params.rho * b * a * np.sqrt(psi), atol=1e-12)
        assert_allclose(d.h2_dot, params.rho_bar * b * a * np.sqrt(psi), atol=1e-12)

    def test_uncorrelated_price_drift_has_no_variance_channel(self, grid, alpha, spec):
        p0 = replace(EQUITY_PARAMS, rho=1e-14)
        d = mdp_price_drift(spec, alpha, p0, grid)
        assert np.abs(d.h1_dot).max() <= 1e-12

    def test_scale_matches_deterministic_vol_root(self, params, grid, alpha, spec):
        # same scalar problem as the sigma = sqrt(psi) baseline
        sigma = np.sqrt(psi_deterministic(params, grid))
        red = bs_beta(spec, sigma, alpha, grid, params)
        d = mdp_price_drift(spec, alpha, params, grid)
        a = alpha.on_grid(grid)
        b = d.h2_dot[0] / (params.rho_bar * a[0] * sigma[0])
        assert b == pytest.approx(red.beta_star, rel=1e-10)

    def test_oracle_agreement(self, params, grid, alpha, spec):
        d = mdp_price_drift(spec, alpha, params, grid)
        problem = mdp_price_problem(spec, params, grid, alpha,
                                    extra_atoms=[(d.h1_dot, d.h2_dot)])
        m1 = problem.basis[0].shape[0]
        cfc = np.zeros(problem.n_coeffs)
        cfc[1] = cfc[m1 + 1] = 1.0
        cf = problem.value(cfc)
        _, vv = varopt.solve(problem, init=cfc, budget=2500)
        assert vv >= cf - 1e-6
        assert vv - cf <= 2e-3 * max(1.0, abs(cf))


class TestSmallTimeMode:
    def test_flat_variance_feed(self, params, grid, alpha, spec):
        d = mdp_small_time_drift(spec, alpha, params, grid)
        a = alpha.on_grid(grid)
        b = d.h2_dot[0] / (params.rho_bar * a[0] * np.sqrt(params.v0))
        assert_allclose(
            d.h2_dot, params.rho_bar * b * a * np.sqrt(params.v0), atol=1e-12
        )

    def test_weighted_moment_factorizes(self, params, grid, alpha):
        from hestonis.drift_mdp import _price_moments

        psi_flat = np.full(grid.n_steps + 1, params.v0)
        a, w, _ = _price_moments(alpha, psi_flat, grid)
        assert w == pytest.approx(params.v0 * float((a[:-1] ** 2).sum() * grid.dt), abs=1e-15)

    def test_adaptive_output_is_flat_profile(self, params, grid, alpha, spec):
        det = mdp_small_time_drift(spec, alpha, params, grid, DriftMode.DETERMINISTIC)
        ada = mdp_small_time_drift(spec, alpha, params, grid, DriftMode.ADAPTIVE)
        assert_allclose(ada.h1_dot * np.sqrt(params.v0), det.h1_dot, atol=1e-13)


class TestLargeTime:
    def test_gamma_moments_against_quadrature(self, params):
        ey, esq = gamma_moments(params)
        assert ey == params.theta
        shape = 2.0 * params.kappa * params.theta / params.xi**2
        rate = 2.0 * params.kappa / params.xi**2
        ref, _ = integrate.quad(
            lambda y: np.sqrt(y) * gamma_dist.pdf(y, shape, scale=1.0 / rate),
            0.0, np.inf,
        )
        assert abs(esq - ref) <= 1e-8
        assert esq == pytest.approx(0.29587, abs=5e-5)

    def test_vol_of_vol_limit_concentrates(self, params):
        tight = replace(params, xi=1e-3)
        _, esq = gamma_moments(tight)
        assert esq == pytest.approx(np.sqrt(params.theta), abs=1e-3)

    def test_constants_values(self, params):
        consts = large_time_constants(params)
        c = params.rho - params.xi / (2.0 * params.kappa)
        assert c == pytest.approx(-0.55)
        _, esq = gamma_moments(params)
        want_nu = (c * c + params.rho_bar**2) * (params.theta - 0.5 * esq * esq)
        assert consts.nu == pytest.approx(want_nu, abs=1e-15)
        assert consts.nu == pytest.approx(0.048665, abs=2e-5)
        assert_allclose(consts.bvec, [0.081364, -0.128126], atol=2e-5)
        assert consts.nu > 0.0

    def test_loading_cancellation(self, params):
        tuned = replace(params, rho=params.xi / (2.0 * params.kappa))
        consts = large_time_constants(tuned)
        assert consts.bvec[0] == pytest.approx(0.0, abs=1e-15)

    def test_quadratic_coefficient_scaling(self, params, grid, alpha):
        # far out of the money the slope is ~1, so c* scales like 1/nu
        spec80 = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 80.0, 1.0)
        F, Fp, c_thr = _fbar_curve(spec80, alpha, params, grid)
        w = float((alpha.on_grid(grid)[:-1] ** 2).sum() * grid.dt)
        c1 = large_time_scalar(F, Fp, c_thr, w, 0.02)
        c4 = large_time_scalar(F, Fp, c_thr, w, 0.08)
        assert c4 / c1 == pytest.approx(0.25, rel=0.02)

    def test_payoff_scale_invariance(self, params, grid, alpha, spec):
        # scaling the payoff by 10 shifts F by log 10 and leaves c* unchanged
        F, Fp, c_thr = _fbar_curve(spec, alpha, params, grid)
        w = float((alpha.on_grid(grid)[:-1] ** 2).sum() * grid.dt)
        c_a = large_time_scalar(F, Fp, c_thr, w, 2.0)
        c_b = large_time_scalar(lambda y: F(y) + np.log(10.0), Fp, c_thr, w, 2.0)
        assert abs(c_a - c_b) <= 1e-10

    def test_drift_shape_and_direction(self, params, grid, alpha, spec):
        d = mdp_large_time_drift(spec, alpha, params, grid)
        a = alpha.on_grid(grid)
        ratio = d.h2_dot[:-1] / d.h1_dot[:-1]
        consts = large_time_constants(params)
        assert_allclose(ratio, consts.bvec[1] / consts.bvec[0], atol=1e-12)
        # pushes the price channel toward the payoff for a call
        assert params.rho * d.h1_dot[0] + params.rho_bar * d.h2_dot[0] > 0.0
        assert_allclose(d.h1_dot[:-1] / a[:-1], d.h1_dot[0] / a[0], atol=1e-10)

    def test_scalar_solution_matches_oracle(self, params, grid, alpha, spec):
        consts = large_time_constants(params)
        nu_dual = 1.0 / consts.nu
        b_dual = -consts.bvec / consts.nu
        d = mdp_large_time_drift(spec, alpha, params, grid)
        a = alpha.on_grid(grid)
        c_star = d.h1_dot[0] / (b_dual[0] * a[0])
        problem = large_time_problem(spec, params, grid, alpha, nu_dual)
        cfc = np.zeros(problem.n_coeffs)
        cfc[0] = c_star
        cf = problem.value(cfc)
        _, vv = varopt.solve(problem, init=cfc, budget=2000)
        assert vv >= cf - 1e-6
        assert vv - cf <= 2e-3 * max(1.0, abs(cf))

    def test_cost_is_comparable_to_scalar_baseline(self, params, grid, alpha, spec):
        sigma = np.sqrt(psi_deterministic(params, grid))
        t0 = time.perf_counter()
        for _ in range(5):
            bs_beta(spec, sigma, alpha, grid, params)
        t_bs = time.perf_counter() - t0
        t0 = time.perf_counter()
        for _ in range(5):
            mdp_large_time_drift(spec, alpha, params, grid)
        t_lt = time.perf_counter() - t0
        assert t_lt <= 2.0 * t_bs + 0.05
