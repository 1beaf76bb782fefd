"""Deterministic-volatility drift optimizer and its fully adaptive variant.

With a deterministic volatility sigma(t) the log-price small-noise problem for
a weighted call payoff collapses to a scalar: search x_dot = beta alpha sigma
and maximize phi(beta) = F(beta v) - beta^2 v / 2 with v = sum (alpha sigma)^2 dt.
For F(x) = log(e^x - e^c)^+ the stationarity condition is exactly

    v beta + log(beta - 1) - log(beta) - c = 0,

with a unique root on (1, inf). The two-channel embedding puts the optimal
drift on B = rho W + rho_bar W_perp: (h1, h2) = beta alpha sigma (rho, rho_bar).

The fully adaptive variant re-solves the scalar root on the remaining horizon
at every step, with sigma frozen at the running sqrt(V_i) and the payoff
threshold shifted by the accumulated weighted return.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import OptimError
from .measure import DriftMode, DriftSchedule
from .model import HestonParams, TimeGrid, psi_deterministic
from .payoff import PayoffSpec, WeightPath, log_forward
from .varopt import NEG_SENTINEL, VariationalProblem, atom_basis, hat_basis, stack_basis

BETA_BRACKET_HI = 1.0e6
BETA_BRACKET_LO = 1.0 + 1.0e-12


@dataclass(frozen=True)
class BsReduction:
    """Scalar reduction of the deterministic-volatility problem."""

    sigma: np.ndarray
    alpha: np.ndarray
    v_quad: float
    c_threshold: float
    beta_star: float


def call_curve(spec: PayoffSpec, params: HestonParams, shift: float = 0.0):
    """F, F' and the vanishing threshold for a call payoff on the aggregated return.

    ``shift`` moves the argument (log-price conventions subtract half the
    integrated weighted variance). Returns (F, Fp, c) with F(y) = -inf for
    y <= c, where c = log K - m + shift.
    """
    m = log_forward(spec, params) - shift
    strike = spec.strike

    def F(y):
        y = np.asarray(y, dtype=float)
        gap = np.exp(m + y) - strike
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(gap > 0.0, np.log(np.maximum(gap, 1e-300)), -np.inf)
        return out if out.ndim else float(out)

    def Fp(y):
        y = np.asarray(y, dtype=float)
        ey = np.exp(m + y)
        gap = ey - strike
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(gap > 0.0, ey / np.where(gap > 0.0, gap, 1.0), np.inf)
        return out if out.ndim else float(out)

    c = np.log(strike) - m if strike > 0.0 else -np.inf
    return F, Fp, c


def bs_root(v: float, c: float) -> float:
    """Unique root of v b + log(b - 1) - log(b) - c = 0 on (1, inf)."""

    def g(b):
        return v * b + np.log(b - 1.0) - np.log(b) - c

    def gp(b):
        return v + 1.0 / (b - 1.0) - 1.0 / b

    if g(BETA_BRACKET_LO) >= 0.0:
        return BETA_BRACKET_LO  # deep in the money: root pinned at the bracket floor
    hi = 2.0
    while g(hi) < 0.0:
        hi *= 4.0
        if hi > BETA_BRACKET_HI:
            raise OptimError(f"payoff unreachable: no root below beta = {BETA_BRACKET_HI}")
    beta = optimize.brentq(g, BETA_BRACKET_LO, hi, xtol=1e-14, rtol=8.9e-16)
    for _ in range(2):  # Newton polish to drive the residual to rounding level
        beta -= g(beta) / gp(beta)
        beta = min(max(beta, BETA_BRACKET_LO), BETA_BRACKET_HI)
    return float(beta)


def bs_beta(
    spec: PayoffSpec,
    sigma: np.ndarray,
    alpha: WeightPath,
    grid: TimeGrid,
    params: HestonParams,
) -> BsReduction:
    """Optimal scalar beta for the deterministic-volatility weighted call."""
    a = alpha.on_grid(grid)
    sig = np.asarray(sigma, dtype=float)
    v_quad = float(((a[:-1] * sig[:-1]) ** 2).sum() * grid.dt)
    shift = 0.5 * float((a[:-1] * sig[:-1] ** 2).sum() * grid.dt)
    _, _, c = call_curve(spec, params, shift)
    if v_quad <= 0.0:
        raise OptimError("degenerate quadratic weight: v_quad = 0")
    beta = bs_root(v_quad, c)
    return BsReduction(sigma=sig, alpha=a, v_quad=v_quad, c_threshold=c, beta_star=beta)


def bs_drift(
    beta_star: float,
    sigma: np.ndarray,
    alpha: np.ndarray,
    rho: float,
    grid: TimeGrid,
    mode: DriftMode = DriftMode.DETERMINISTIC,
) -> DriftSchedule:
    """Embed the scalar solution in the two channels: rho h1 + rho_bar h2 = beta alpha sigma."""
    rho_bar = float(np.sqrt(1.0 - rho * rho))
    profile = beta_star * np.asarray(alpha) * np.asarray(sigma)
    if mode is DriftMode.ADAPTIVE:
        profile = beta_star * np.asarray(alpha, dtype=float)
    return DriftSchedule(
        mode=mode,
        h1_dot=rho * profile,
        h2_dot=rho_bar * profile,
        provenance="bs",
    )


def heston_bs_drift(
    spec: PayoffSpec,
    params: HestonParams,
    grid: TimeGrid,
    mode: DriftMode = DriftMode.DETERMINISTIC,
) -> DriftSchedule:
    """Deterministic-volatility baseline for Heston: sigma(t) = sqrt(psi_t)."""
    sigma = np.sqrt(psi_deterministic(params, grid))
    red = bs_beta(spec, sigma, spec.weight, grid, params)
    return bs_drift(red.beta_star, sigma, red.alpha, params.rho, grid, mode)


def _vector_bs_root(v: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized root of v b + log(b-1) - log(b) = c over paths.

    Solved in u = log(b - 1) (monotone, unbounded) by bisection; entries whose
    root would exceed the beta bracket are returned as nan for the caller to
    zero out.
    """
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = np.full(v.shape, -745.0)
    hi = np.full(v.shape, np.log(BETA_BRACKET_HI))
    bad = v <= 0.0
    v_safe = np.where(bad, 1.0, v)

    def g(u):
        b = 1.0 + np.exp(u)
        return v_safe * b + u - np.log(b) - c

    unreachable = g(hi) < 0.0
    pinned = g(lo) >= 0.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        lo = np.where(gm < 0.0, mid, lo)
        hi = np.where(gm < 0.0, hi, mid)
    beta = 1.0 + np.exp(0.5 * (lo + hi))
    beta = np.where(pinned, BETA_BRACKET_LO, beta)
    beta = np.where(unreachable | bad, np.nan, beta)
    return beta


def bs_fully_adaptive_step(
    i: int,
    t_i: float,
    y_acc: np.ndarray,
    v_i: np.ndarray,
    ctx: dict,
):
    """Per-step modulation: re-solve the scalar problem on [t_i, T] per path.

    sigma is frozen at sqrt(V_i) and the call threshold shifted by the weighted
    return accumulated so far. Paths whose remaining payoff is unreachable in
    the beta bracket get zero drift for the step.
    """
    a2 = ctx["alpha2_rem"][i]  # sum_{j>=i} alpha_j^2 dt
    a1 = ctx["alpha1_rem"][i]  # sum_{j>=i} alpha_j dt
    alpha_i = ctx["alpha"][i]
    v_quad = v_i * a2
    c = ctx["c_base"] - y_acc + 0.5 * v_i * a1
    beta = _vector_bs_root(v_quad, c)
    sq = np.sqrt(v_i)
    amp = np.where(np.isnan(beta), 0.0, beta) * alpha_i * sq
    return ctx["rho"] * amp, ctx["rho_bar"] * amp


def bs_fully_adaptive(
    spec: PayoffSpec, params: HestonParams, grid: TimeGrid
) -> DriftSchedule:
    """Per-step adaptive schedule built on the scalar re-solve."""
    a = spec.weight.on_grid(grid)
    a2 = np.concatenate([np.cumsum((a[:-1] ** 2)[::-1])[::-1] * grid.dt, [0.0]])
    a1 = np.concatenate([np.cumsum(a[:-1][::-1])[::-1] * grid.dt, [0.0]])
    _, _, c_base = call_curve(spec, params, 0.0)
    ctx = {
        "alpha": a,
        "alpha2_rem": a2,
        "alpha1_rem": a1,
        "c_base": c_base,
        "rho": params.rho,
        "rho_bar": params.rho_bar,
    }

    def step_fn(i, t_i, y_acc, v_i):
        return bs_fully_adaptive_step(i, t_i, y_acc, v_i, ctx)

    return DriftSchedule(
        mode=DriftMode.PER_STEP_ADAPTIVE,
        step_fn=step_fn,
        alpha_knots=a,
        provenance="bs_a2",
    )


def solve_call_scale(F, Fp, c: float, s1: float, s2: float) -> float:
    """argmax over beta of F(beta s1) - beta^2 s2 / 2 for an increasing call-type F.

    Stationarity s1 F'(beta s1) = beta s2 has a unique root when s1, s2 > 0.
    """
    if s1 <= 0.0 or s2 <= 0.0:
        raise OptimError("scalar reduction needs positive moments")

    def q(b):
        return s1 * Fp(b * s1) - b * s2

    lo = 0.0
    if np.isfinite(c) and c > 0.0:
        lo = c / s1 * (1.0 + 1e-9) + 1e-300
    hi = max(2.0 * lo, 1.0)
    while q(hi) > 0.0:
        hi *= 4.0
        if hi > 1e9:
            raise OptimError("scalar stationarity root escaped the bracket")
    beta = optimize.brentq(q, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    return float(beta)


def bs_problem(
    spec: PayoffSpec,
    params: HestonParams,
    grid: TimeGrid,
    sigma: np.ndarray,
    rich_basis: bool = True,
) -> VariationalProblem:
    """Single-channel variational form sup F(sum alpha sigma x dt) - ||x||^2/2.

    With ``rich_basis`` False the basis is the lone alpha*sigma atom, so the
    optimal coefficient is directly comparable to the scalar beta.
    """
    a = spec.weight.on_grid(grid)
    sig = np.asarray(sigma, dtype=float)
    shift = 0.5 * float((a[:-1] * sig[:-1] ** 2).sum() * grid.dt)
    F, _, _ = call_curve(spec, params, shift)
    asig = a * sig
    dt = grid.dt

    def objective(xdot):
        y = float((asig[:-1] * xdot[:-1]).sum() * dt)
        val = F(y)
        if not np.isfinite(val):
            return NEG_SENTINEL
        return val - 0.5 * float((xdot[:-1] ** 2).sum() * dt)

    atom = atom_basis([asig])
    basis = stack_basis(atom, hat_basis(grid, 9)) if rich_basis else atom
    seed = np.zeros(basis.shape[0])
    seed[0] = 1.0
    return VariationalProblem(
        objective=objective,
        basis=[basis],
        grid=grid,
        seed_coeffs=[seed],
        label="bs",
    )
