"""Moderate-deviations drift optimizers: small-noise (log-price and price),
small-time, and large-time modes.

All four reduce to scalar problems of the form argmax F(beta S1) - beta^2 S2/2
around the deterministic variance path psi (the fluctuation problems are
linear-quadratic), so each optimizer is a safeguarded root solve rather than a
search. The building blocks for the log-price mode are

    B_t = int_0^t f'(psi) ds            (Heston: -kappa t)
    gamma_t = int_0^t e^{B} alpha ds
    u = g(psi) e^{-B} (gamma - gamma_T) / 4,

with channel loadings U = beta (u + rho alpha sqrt(psi)/2) and
Z = beta (rho u + alpha sqrt(psi)/2); the price mode loses the fluctuation
feedback and collapses onto the deterministic-volatility drift family
x_dot = beta alpha sqrt(psi) (rho, rho_bar)/2. The large-time mode draws its
constants from the Gamma invariant measure of the variance process.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, OptimError
from .measure import DriftMode, DriftSchedule
from .model import HestonParams, TimeGrid, psi_deterministic
from .payoff import PayoffSpec, WeightPath
from .varopt import NEG_SENTINEL, VariationalProblem, hat_basis, stack_basis
from .drift_bs import bs_root, call_curve, solve_call_scale


def _cumtrapz(y: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * dx, out=out[1:])
    return out


@dataclass(frozen=True)
class MdpAuxiliary:
    """Deterministic building blocks of the log-price fluctuation problem."""

    psi: np.ndarray
    b_path: np.ndarray
    gamma: np.ndarray
    gamma_t_end: float
    u: np.ndarray

    def __post_init__(self):
        # u_T = 0 exactly: gamma - gamma_T vanishes at the horizon.
        assert abs(self.u[-1]) < 1e-14 * max(1.0, np.abs(self.u).max())


def mdp_auxiliary(alpha: WeightPath, params: HestonParams, grid: TimeGrid) -> MdpAuxiliary:
    psi = psi_deterministic(params, grid)
    b_path = -params.kappa * grid.knots  # int f'(psi) with f' = -kappa
    a = alpha.on_grid(grid)
    gamma = _cumtrapz(np.exp(b_path) * a, grid.dt)
    g_psi = params.xi * np.sqrt(psi)
    u = 0.25 * g_psi * np.exp(-b_path) * (gamma - gamma[-1])
    return MdpAuxiliary(psi=psi, b_path=b_path, gamma=gamma, gamma_t_end=float(gamma[-1]), u=u)


def _log_reduction(alpha: WeightPath, params: HestonParams, grid: TimeGrid):
    """Scalar moments (S1, S2) of the log-price problem, plus the channel loadings at beta = 1.

    S1 multiplies beta inside F-bar, S2 is the quadratic penalty weight:
        S1 = int alpha [ (rho u + alpha sqrt(psi)/2) sqrt(psi) - eta1/2 ],
        eta1 = e^{B} int e^{-B} g(psi) (u + rho alpha sqrt(psi)/2),
        S2 = int [ (u + rho alpha sqrt(psi)/2)^2 + rho_bar^2 alpha^2 psi / 4 ].
    """
    aux = mdp_auxiliary(alpha, params, grid)
    a = alpha.on_grid(grid)
    rho, rho_bar = params.rho, params.rho_bar
    sqp = np.sqrt(aux.psi)
    g_psi = params.xi * sqp
    u_load = aux.u + 0.5 * rho * a * sqp          # U / beta
    z_load = rho * aux.u + 0.5 * a * sqp          # Z / beta
    eta1 = np.exp(aux.b_path) * _cumtrapz(np.exp(-aux.b_path) * g_psi * u_load, grid.dt)
    phi_dot_load = z_load * sqp - 0.5 * eta1
    dt = grid.dt
    s1 = float((a[:-1] * phi_dot_load[:-1]).sum() * dt)
    s2 = float(((u_load[:-1] ** 2) + 0.25 * rho_bar**2 * (a[:-1] ** 2) * aux.psi[:-1]).sum() * dt)
    return aux, a, u_load, z_load, s1, s2


def _fbar_curve(spec: PayoffSpec, alpha: WeightPath, params: HestonParams, grid: TimeGrid):
    """Call curve with the centered-argument shift int alpha psi / 2."""
    psi = psi_deterministic(params, grid)
    a = alpha.on_grid(grid)
    shift = 0.5 * float((a[:-1] * psi[:-1]).sum() * grid.dt)
    return call_curve(spec, params, shift)


def mdp_log_objective(
    beta: float,
    eta0: float,
    spec: PayoffSpec,
    alpha: WeightPath,
    params: HestonParams,
    grid: TimeGrid,
) -> float:
    """F-bar(beta S1 - eta0 int alpha e^{B} / 2) - beta^2 S2 / 2.

    eta0 shifts the starting point of the fluctuation eta; the admissible
    problem pins it to zero (the optimizer only searches beta), but the term is
    exposed for diagnostics.
    """
    aux, a, _, _, s1, s2 = _log_reduction(alpha, params, grid)
    F, _, _ = _fbar_curve(spec, alpha, params, grid)
    eta0_term = -0.5 * eta0 * float(
        (a[:-1] * np.exp(aux.b_path[:-1])).sum() * grid.dt
    )
    val = F(beta * s1 + eta0_term)
    if not np.isfinite(val):
        return -np.inf
    return float(val) - 0.5 * beta * beta * s2


def mdp_log_drift(
    spec: PayoffSpec,
    alpha: WeightPath,
    params: HestonParams,
    grid: TimeGrid,
    output: DriftMode = DriftMode.DETERMINISTIC,
) -> DriftSchedule:
    """Log-price small-noise drift: (U, (Z - rho U)/rho_bar) at the optimal beta."""
    aux, a, u_load, z_load, s1, s2 = _log_reduction(alpha, params, grid)
    F, Fp, c = _fbar_curve(spec, alpha, params, grid)
    beta = solve_call_scale(F, Fp, c, s1, s2)
    sqp = np.sqrt(aux.psi)
    h1 = beta * u_load
    h2 = beta * (z_load - params.rho * u_load) / params.rho_bar
    if output is DriftMode.ADAPTIVE:
        return DriftSchedule(DriftMode.ADAPTIVE, h1 / sqp, h2 / sqp, provenance="mdp_log")
    return DriftSchedule(DriftMode.DETERMINISTIC, h1, h2, provenance="mdp_log")


def _price_moments(alpha: WeightPath, psi: np.ndarray, grid: TimeGrid):
    a = np.broadcast_to(np.asarray(alpha.alpha(grid.knots), dtype=float), grid.knots.shape)
    w = float(((a[:-1] ** 2) * psi[:-1]).sum() * grid.dt)
    shift = 0.5 * float((a[:-1] * psi[:-1]).sum() * grid.dt)
    return a, w, shift


def mdp_price_drift(
    spec: PayoffSpec,
    alpha: WeightPath,
    params: HestonParams,
    grid: TimeGrid,
    output: DriftMode = DriftMode.DETERMINISTIC,
    psi: np.ndarray | None = None,
) -> DriftSchedule:
    """Price small-noise drift: x_dot = b alpha sqrt(psi) (rho, rho_bar).

    The scalar problem argmax F-bar(b w) - b^2 w / 2 with w = int alpha^2 psi
    is the deterministic-volatility root equation; b > 1 is its unique root.
    """
    if psi is None:
        psi = psi_deterministic(params, grid)
    a, w, shift = _price_moments(alpha, psi, grid)
    _, _, c = call_curve(spec, params, shift)
    if w <= 0.0:
        raise OptimError("degenerate moment int alpha^2 psi = 0")
    b = bs_root(w, c)
    prof = b * a * np.sqrt(psi)
    if output is DriftMode.ADAPTIVE:
        prof = b * a
    return DriftSchedule(
        output if output is DriftMode.ADAPTIVE else DriftMode.DETERMINISTIC,
        params.rho * prof,
        params.rho_bar * prof,
        provenance="mdp_price",
    )


def mdp_small_time_drift(
    spec: PayoffSpec,
    alpha: WeightPath,
    params: HestonParams,
    grid: TimeGrid,
    output: DriftMode = DriftMode.DETERMINISTIC,
) -> DriftSchedule:
    """Small-time mode: the price problem with f = 0 and psi frozen at v0."""
    psi = np.full(grid.n_steps + 1, params.v0)
    drift = mdp_price_drift(spec, alpha, params, grid, output, psi=psi)
    return DriftSchedule(
        drift.mode, drift.h1_dot, drift.h2_dot, provenance="mdp_small_time"
    )


# ---------------------------------------------------------------------------
# Large-time mode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LargeTimeConstants:
    """Moments of the Gamma invariant measure and the reduced-problem constants."""

    ey: float
    esqrt: float
    nu: float
    bvec: np.ndarray


def gamma_moments(params: HestonParams) -> tuple[float, float]:
    """E[Y] and E[sqrt(Y)] under the invariant Gamma(2 kappa theta/xi^2, 2 kappa/xi^2)."""
    shape = 2.0 * params.kappa * params.theta / params.xi**2
    esqrt = float(
        np.exp(gammaln(shape + 0.5) - gammaln(shape)) * params.xi / np.sqrt(2.0 * params.kappa)
    )
    return params.theta, esqrt


def large_time_constants(params: HestonParams) -> LargeTimeConstants:
    """nu = (c^2 + rho_bar^2)(E[Y] - E[sqrt Y]^2/2), B = -(c, rho_bar) E[sqrt Y]/2,
    with c = rho - xi/(2 kappa) from the Poisson-equation loading."""
    ey, esqrt = gamma_moments(params)
    c = params.rho - params.xi / (2.0 * params.kappa)
    nu = (c * c + params.rho_bar**2) * (ey - 0.5 * esqrt * esqrt)
    if nu <= 0.0:
        raise DomainError(f"large-time quadratic coefficient must be positive, got {nu}")
    bvec = -0.5 * np.array([c, params.rho_bar]) * esqrt
    return LargeTimeConstants(ey=ey, esqrt=esqrt, nu=nu, bvec=bvec)


def large_time_scalar(F, Fp, c_thr: float, w: float, nu: float) -> float:
    """argmax over c of F(c w) - nu c^2 w / 4 (penalty coefficient nu/2 per unit)."""
    return solve_call_scale(F, Fp, c_thr, w, 0.5 * nu * w)


def mdp_large_time_drift(
    spec: PayoffSpec,
    alpha: WeightPath,
    params: HestonParams,
    grid: TimeGrid,
) -> DriftSchedule:
    """Deterministic large-time drift h = B_dual c* alpha.

    The constants come from large_time_constants verbatim; the emission applies
    the covariance-inverse duality (nu_dual, B_dual) = (1/nu, -B/nu), which is
    what the reduced problem sup F - (nu_dual/4) int x1^2 with x2 = B_dual x1
    actually requires (B as stored points against the payoff gradient for
    calls and would increase variance).
    """
    consts = large_time_constants(params)
    nu_dual = 1.0 / consts.nu
    b_dual = -consts.bvec / consts.nu
    a = alpha.on_grid(grid)
    w = float((a[:-1] ** 2).sum() * grid.dt)
    F, Fp, c_thr = _fbar_curve(spec, alpha, params, grid)
    c_star = large_time_scalar(F, Fp, c_thr, w, nu_dual)
    return DriftSchedule(
        DriftMode.DETERMINISTIC,
        b_dual[0] * c_star * a,
        b_dual[1] * c_star * a,
        provenance="mdp_large_time",
    )


# ---------------------------------------------------------------------------
# Variational forms for the reduced-basis oracle
# ---------------------------------------------------------------------------

def mdp_log_problem(
    spec: PayoffSpec | None,
    params: HestonParams,
    grid: TimeGrid,
    alpha: WeightPath | None = None,
    payoff_log: Callable[[np.ndarray, np.ndarray, np.ndarray], float] | None = None,
    extra_atoms: list[tuple[np.ndarray, np.ndarray]] | None = None,
    n_hats: int = 9,
) -> VariationalProblem:
    """sup F-bar(sum alpha phi_dot) - ||x||^2/2 with the eta feedback:

        eta = e^{B} int e^{-B} g(psi) x1_dot,   phi_dot = sqrt(psi) (rho x1 + rho_bar x2) - eta/2.

    ``payoff_log(phi_dot, psi, eta)`` overrides the call form (variance-payoff
    functionals read psi + eta as the variance proxy).
    """
    psi = psi_deterministic(params, grid)
    sqp = np.sqrt(psi)
    g_psi = params.xi * sqp
    b_path = -params.kappa * grid.knots
    eb, enb = np.exp(b_path), np.exp(-b_path)
    dt = grid.dt
    rho, rho_bar = params.rho, params.rho_bar

    if payoff_log is None:
        if spec is None or alpha is None:
            raise OptimError("need a call spec with weight or an explicit functional")
        F, _, _ = _fbar_curve(spec, alpha, params, grid)
        alpha_k = alpha.on_grid(grid)

        def payoff_log(phi_dot, psi_, eta):
            return F(float((alpha_k[:-1] * phi_dot[:-1]).sum() * dt))

    def objective(xdot1, xdot2):
        eta = eb * _cumtrapz(enb * g_psi * xdot1, dt)
        phi_dot = sqp * (rho * xdot1 + rho_bar * xdot2) - 0.5 * eta
        val = payoff_log(phi_dot, psi, eta)
        if not np.isfinite(val):
            return NEG_SENTINEL
        pen = 0.5 * float(((xdot1[:-1] ** 2) + (xdot2[:-1] ** 2)).sum() * dt)
        return val - pen

    shape = sqp if alpha is None else sqp * alpha.on_grid(grid)
    blocks1 = [shape[None, :], np.ones((1, grid.n_steps + 1))]
    blocks2 = [shape[None, :], np.ones((1, grid.n_steps + 1))]
    if extra_atoms:
        blocks1 += [np.asarray(p1, dtype=float)[None, :] for p1, _ in extra_atoms]
        blocks2 += [np.asarray(p2, dtype=float)[None, :] for _, p2 in extra_atoms]
    ch1 = stack_basis(*blocks1, hat_basis(grid, n_hats))
    ch2 = stack_basis(*blocks2, hat_basis(grid, n_hats))
    m1 = ch1.shape[0]
    seed = np.zeros(m1 + ch2.shape[0])
    seed[0] = seed[m1] = 1.0
    return VariationalProblem(
        objective=objective, basis=[ch1, ch2], grid=grid, seed_coeffs=[seed],
        label="mdp_log",
    )


def mdp_price_problem(
    spec: PayoffSpec,
    params: HestonParams,
    grid: TimeGrid,
    alpha: WeightPath,
    psi: np.ndarray | None = None,
    extra_atoms: list[tuple[np.ndarray, np.ndarray]] | None = None,
    n_hats: int = 9,
) -> VariationalProblem:
    """sup F-bar(sum alpha phi_dot) - ||x||^2/2 with phi_dot = sqrt(psi)(rho x1 + rho_bar x2)."""
    if psi is None:
        psi = psi_deterministic(params, grid)
    a, w, shift = _price_moments(alpha, psi, grid)
    F, _, _ = call_curve(spec, params, shift)
    sqp = np.sqrt(psi)
    dt = grid.dt
    rho, rho_bar = params.rho, params.rho_bar

    def objective(xdot1, xdot2):
        phi_dot = sqp * (rho * xdot1 + rho_bar * xdot2)
        val = F(float((a[:-1] * phi_dot[:-1]).sum() * dt))
        if not np.isfinite(val):
            return NEG_SENTINEL
        return float(val) - 0.5 * float(((xdot1[:-1] ** 2) + (xdot2[:-1] ** 2)).sum() * dt)

    shape = a * sqp
    blocks1 = [shape[None, :]]
    blocks2 = [shape[None, :]]
    if extra_atoms:
        blocks1 += [np.asarray(p1, dtype=float)[None, :] for p1, _ in extra_atoms]
        blocks2 += [np.asarray(p2, dtype=float)[None, :] for _, p2 in extra_atoms]
    ch1 = stack_basis(*blocks1, hat_basis(grid, n_hats))
    ch2 = stack_basis(*blocks2, hat_basis(grid, n_hats))
    m1 = ch1.shape[0]
    seed = np.zeros(m1 + ch2.shape[0])
    seed[0] = rho
    seed[m1] = rho_bar
    return VariationalProblem(
        objective=objective, basis=[ch1, ch2], grid=grid, seed_coeffs=[seed],
        label="mdp_price",
    )


def large_time_problem(
    spec: PayoffSpec,
    params: HestonParams,
    grid: TimeGrid,
    alpha: WeightPath,
    nu: float,
    extra_atoms: list[np.ndarray] | None = None,
    n_hats: int = 9,
) -> VariationalProblem:
    """Single-channel reduced form sup F-bar(sum alpha x1) - (nu/4) sum x1^2."""
    a = alpha.on_grid(grid)
    F, _, _ = _fbar_curve(spec, alpha, params, grid)
    dt = grid.dt

    def objective(xdot1):
        val = F(float((a[:-1] * xdot1[:-1]).sum() * dt))
        if not np.isfinite(val):
            return NEG_SENTINEL
        return float(val) - 0.25 * nu * float((xdot1[:-1] ** 2).sum() * dt)

    blocks = [a[None, :]]
    if extra_atoms:
        blocks += [np.asarray(p, dtype=float)[None, :] for p in extra_atoms]
    basis = stack_basis(*blocks, hat_basis(grid, n_hats))
    seed = np.zeros(basis.shape[0])
    seed[0] = 1.0
    return VariationalProblem(
        objective=objective, basis=[basis], grid=grid, seed_coeffs=[seed],
        label="mdp_large_time",
    )
