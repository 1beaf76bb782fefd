import numpy as np
import pytest
from numpy.testing import assert_allclose

from hestonis import varopt
from hestonis.drift_bs import (
    bs_beta,
    bs_drift,
    bs_fully_adaptive,
    bs_problem,
    bs_root,
    call_curve,
    heston_bs_drift,
    solve_call_scale,
    _vector_bs_root,
)
from hestonis.errors import OptimError
from hestonis.measure import DriftMode
from hestonis.model import TimeGrid, psi_deterministic
from hestonis.payoff import PayoffKind, make_payoff


def test_root_equation_unit_case():
    # v = 1, c = 2 - log 2 has the exact root beta = 2
    beta = bs_root(1.0, 2.0 - np.log(2.0))
    assert beta == pytest.approx(2.0, abs=1e-10)
    resid = 1.0 * beta + np.log(beta - 1.0) - np.log(beta) - (2.0 - np.log(2.0))
    assert abs(resid) <= 1e-10


def test_deep_in_the_money_pins_at_one():
    assert bs_root(0.02, -80.0) == pytest.approx(1.0, abs=1e-9)


def test_unreachable_payoff_raises():
    with pytest.raises(OptimError):
        bs_root(1e-7, 5.0)


def test_root_residual_and_stationarity(params, grid):
    spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 60.0, 1.0)
    sigma = np.sqrt(psi_deterministic(params, grid))
    red = bs_beta(spec, sigma, spec.weight, grid, params)
    resid = (
        red.v_quad * red.beta_star
        + np.log(red.beta_star - 1.0)
        - np.log(red.beta_star)
        - red.c_threshold
    )
    assert abs(resid) <= 1e-10
    a = spec.weight.on_grid(grid)
    shift = 0.5 * float((a[:-1] * sigma[:-1] ** 2).sum() * grid.dt)
    _, fp, _ = call_curve(spec, params, shift)
    assert abs(fp(red.beta_star * red.v_quad) - red.beta_star) <= 1e-10


class TestDriftEmbedding:
    def test_zero_beta_gives_zero_schedule(self, grid):
        alpha = np.ones(grid.n_steps + 1)
        sigma = np.full(grid.n_steps + 1, 0.25)
        d = bs_drift(0.0, sigma, alpha, -0.5, grid)
        assert np.all(d.h1_dot == 0.0)
        assert np.all(d.h2_dot == 0.0)

    def test_zero_correlation_uses_orthogonal_channel_only(self, grid):
        alpha = np.ones(grid.n_steps + 1)
        sigma = np.full(grid.n_steps + 1, 0.25)
        d = bs_drift(2.0, sigma, alpha, 0.0, grid)
        assert np.all(d.h1_dot == 0.0)
        assert_allclose(d.h2_dot, 0.5)

    def test_unit_weight_arithmetic(self, grid):
        alpha = np.ones(grid.n_steps + 1)
        sigma = np.full(grid.n_steps + 1, 0.25)
        d = bs_drift(2.0, sigma, alpha, -0.5, grid)
        assert_allclose(d.h1_dot, -0.25, atol=1e-15)
        assert_allclose(d.h2_dot, 0.25 * np.sqrt(3.0), atol=1e-15)

    def test_channel_reconstruction(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 55.0, 1.0)
        sigma = np.sqrt(psi_deterministic(params, grid))
        red = bs_beta(spec, sigma, spec.weight, grid, params)
        d = bs_drift(red.beta_star, sigma, red.alpha, params.rho, grid)
        lhs = params.rho * d.h1_dot + params.rho_bar * d.h2_dot
        assert np.abs(lhs - red.beta_star * red.alpha * sigma).max() <= 1e-14

    def test_adaptive_profile_divides_out_sigma(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 55.0, 1.0)
        det = heston_bs_drift(spec, params, grid, DriftMode.DETERMINISTIC)
        ada = heston_bs_drift(spec, params, grid, DriftMode.ADAPTIVE)
        sigma = np.sqrt(psi_deterministic(params, grid))
        assert_allclose(ada.h1_dot * sigma, det.h1_dot, atol=1e-14)


def test_single_atom_oracle_reproduces_root(params):
    # constant sigma = 0.25, geometric weight, far strike
    grid = TimeGrid(252, 1.0)
    spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 80.0, 1.0)
    sigma = np.full(grid.n_steps + 1, 0.25)
    red = bs_beta(spec, sigma, spec.weight, grid, params)
    problem = bs_problem(spec, params, grid, sigma, rich_basis=False)
    coeffs, _ = varopt.solve(problem, init=np.array([red.beta_star]), budget=800)
    assert abs(float(coeffs[0]) - red.beta_star) <= 1e-4


class TestFullyAdaptive:
    def test_first_step_matches_static_problem(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 50.0, 1.0)
        sched = bs_fully_adaptive(spec, params, grid)
        v0 = np.full(8, params.v0)
        m1, m2 = sched.step_fn(0, 0.0, np.zeros(8), v0)
        sigma0 = np.full(grid.n_steps + 1, np.sqrt(params.v0))
        red = bs_beta(spec, sigma0, spec.weight, grid, params)
        want = red.beta_star * 1.0 * np.sqrt(params.v0)
        assert_allclose(m1, params.rho * want, rtol=1e-9)
        assert_allclose(m2, params.rho_bar * want, rtol=1e-9)

    def test_deep_accumulated_state_shrinks_beta(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 50.0, 1.0)
        sched = bs_fully_adaptive(spec, params, grid)
        i = 60
        v = np.full(2, params.v0)
        m_flat, _ = sched.step_fn(i, grid.knots[i], np.zeros(2), v)
        m_itm, _ = sched.step_fn(i, grid.knots[i], np.full(2, 4.0), v)
        assert np.all(np.abs(m_itm) < np.abs(m_flat))
        # beta near 1 deep in the money: |m| ~ alpha sigma
        a_i = spec.weight.on_grid(grid)[i]
        assert np.abs(np.abs(m_itm) - np.abs(params.rho) * a_i * np.sqrt(params.v0)).max() < 5e-3

    def test_near_expiry_values_stay_finite(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 50.0, 1.0)
        sched = bs_fully_adaptive(spec, params, grid)
        i = grid.n_steps - 1
        y = np.array([-0.5, -0.01, 0.0, 0.2])
        m1, m2 = sched.step_fn(i, grid.knots[i], y, np.full(4, params.v0))
        assert np.all(np.isfinite(m1)) and np.all(np.isfinite(m2))

    def test_unreachable_payoff_returns_zero_drift(self, params, grid):
        spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 50.0, 1.0)
        sched = bs_fully_adaptive(spec, params, grid)
        i = grid.n_steps - 1
        m1, m2 = sched.step_fn(
            i, grid.knots[i], np.full(3, -3.0), np.full(3, params.v0)
        )
        assert np.all(m1 == 0.0) and np.all(m2 == 0.0)


def test_vector_root_matches_scalar():
    v = np.array([0.02, 0.4, 1.0, 3.0])
    c = np.array([-0.3, 0.1, 2.0 - np.log(2.0), 1.0])
    betas = _vector_bs_root(v, c)
    for vi, ci, bi in zip(v, c, betas):
        assert bi == pytest.approx(bs_root(vi, ci), rel=1e-10, abs=1e-10)


def test_solve_call_scale_matches_root_when_moments_agree(params, grid):
    spec = make_payoff(PayoffKind.GEOMETRIC_ASIAN_CALL, 60.0, 1.0)
    sigma = np.sqrt(psi_deterministic(params, grid))
    red = bs_beta(spec, sigma, spec.weight, grid, params)
    a = spec.weight.on_grid(grid)
    shift = 0.5 * float((a[:-1] * sigma[:-1] ** 2).sum() * grid.dt)
    F, Fp, c = call_curve(spec, params, shift)
    beta = solve_call_scale(F, Fp, c, red.v_quad, red.v_quad)
    assert beta == pytest.approx(red.beta_star, rel=1e-10)
