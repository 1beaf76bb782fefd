"""Path generation for (X, V) under the sampling measure.

Variance uses the full-truncation scheme (drift and diffusion read the
truncated value, the stored state may go negative):

    Vt_{i+1} = Vt_i + kappa (theta - Vt_i^+) dt + xi sqrt(Vt_i^+) dW_i
    V_i      = Vt_i^+

and the log return a standard Euler step driven by the truncated variance:

    X_{i+1} = X_i - V_i/2 dt + sqrt(V_i) (rho dW_i + rho_bar dW_i^perp).

Under a drift-shifted measure the increments are shifted before entering both
recursions: dW_i <- dW_i^Q + m1(t_i) dt (and likewise the orthogonal channel),
with the modulation (m1, m2) defined by the schedule mode. Batches retain the
Q-increments so weights can be recomputed after the fact.

Normals come from the counter-based Philox generator through the inverse CDF,
so parallel chunks with distinct stream offsets are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DomainError
from .measure import DriftMode, DriftSchedule
from .model import HestonParams, TimeGrid


@dataclass(frozen=True)
class RngSpec:
    """Seed plus per-chunk stream offset; (seed, offset, n_steps) pins the increments."""

    seed: int
    stream_offset: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_offset,))
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class PathBatch:
    """Simulated paths with the Brownian increments retained for reweighting.

    x, v, v_raw have shape (n_paths, n_steps + 1); dw, dw_perp have shape
    (n_paths, n_steps) and hold the increments of the simulating measure.
    """

    x: np.ndarray
    v: np.ndarray
    v_raw: np.ndarray
    dw: np.ndarray
    dw_perp: np.ndarray
    grid: TimeGrid
    seed: RngSpec
    log_inv_weight: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    def spot(self, params: HestonParams) -> np.ndarray:
        return params.s0 * np.exp(params.r * self.grid.knots + self.x)


def normal_increments(
    rng: RngSpec, n_paths: int, n_steps: int, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Two (n_paths, n_steps) blocks of N(0, dt) increments via inverse CDF."""
    gen = rng.generator()
    z = gen.random((n_paths, 2 * n_steps))
    z += 2.0**-54  # keep uniforms strictly inside (0, 1) for ndtri
    ndtri(z, out=z)
    z *= np.sqrt(dt)
    return z[:, :n_steps], z[:, n_steps:]


def _evolve(
    params: HestonParams,
    grid: TimeGrid,
    dw: np.ndarray,
    dw_perp: np.ndarray,
    drift: DriftSchedule | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    """Run the scheme; returns (x, v, v_raw, log_inv_weight or None)."""
    n_paths, n = dw.shape
    dt = grid.dt
    k, th, xi = params.kappa, params.theta, params.xi
    rho, rho_bar = params.rho, params.rho_bar

    x = np.zeros((n_paths, n + 1))
    v = np.empty((n_paths, n + 1))
    v_raw = np.empty((n_paths, n + 1))
    v_raw[:, 0] = params.v0
    v[:, 0] = params.v0

    per_step = drift is not None and drift.mode is DriftMode.PER_STEP_ADAPTIVE
    logw = np.zeros(n_paths) if drift is not None else None
    y_acc = np.zeros(n_paths) if per_step else None
    alpha = drift.alpha_knots if per_step else None

    for i in range(n):
        vplus = v[:, i]
        sq = np.sqrt(vplus)
        if drift is None:
            dwi, dwpi = dw[:, i], dw_perp[:, i]
        else:
            if per_step:
                m1, m2 = drift.step_fn(i, grid.knots[i], y_acc, vplus)
            elif drift.mode is DriftMode.ADAPTIVE:
                m1 = drift.h1_dot[i] * sq
                m2 = drift.h2_dot[i] * sq
            else:
                m1 = drift.h1_dot[i]
                m2 = drift.h2_dot[i]
            dwi = dw[:, i] + m1 * dt
            dwpi = dw_perp[:, i] + m2 * dt
            logw -= m1 * dw[:, i] + m2 * dw_perp[:, i] + 0.5 * (m1 * m1 + m2 * m2) * dt
        v_raw[:, i + 1] = vplus_next = (
            v_raw[:, i] + k * (th - vplus) * dt + xi * sq * dwi
        )
        v[:, i + 1] = np.maximum(vplus_next, 0.0)
        dx = -0.5 * vplus * dt + sq * (rho * dwi + rho_bar * dwpi)
        x[:, i + 1] = x[:, i] + dx
        if per_step:
            y_acc += alpha[i] * dx
    return x, v, v_raw, logw


def simulate_p(
    params: HestonParams, grid: TimeGrid, n_paths: int, rng: RngSpec
) -> PathBatch:
    """Paths under the base measure."""
    dw, dwp = normal_increments(rng, n_paths, grid.n_steps, grid.dt)
    x, v, v_raw, _ = _evolve(params, grid, dw, dwp, None)
    return PathBatch(x, v, v_raw, dw, dwp, grid, rng)


def simulate_q(
    params: HestonParams,
    grid: TimeGrid,
    n_paths: int,
    rng: RngSpec,
    drift: DriftSchedule,
) -> PathBatch:
    """Paths under the drift-shifted measure; retains Q-increments and weights."""
    drift.check_grid(grid)
    dw, dwp = normal_increments(rng, n_paths, grid.n_steps, grid.dt)
    x, v, v_raw, logw = _evolve(params, grid, dw, dwp, drift)
    return PathBatch(x, v, v_raw, dw, dwp, grid, rng, log_inv_weight=logw)


def antithetic_pairs(
    params: HestonParams, grid: TimeGrid, n_paths: int, rng: RngSpec
) -> PathBatch:
    """Mirrored-increment pairs: path 2k+1 negates the increments of path 2k."""
    if n_paths % 2 != 0:
        raise DomainError("antithetic batches need an even number of paths")
    half = n_paths // 2
    dw_h, dwp_h = normal_increments(rng, half, grid.n_steps, grid.dt)
    dw = np.empty((n_paths, grid.n_steps))
    dwp = np.empty((n_paths, grid.n_steps))
    dw[0::2], dw[1::2] = dw_h, -dw_h
    dwp[0::2], dwp[1::2] = dwp_h, -dwp_h
    x, v, v_raw, _ = _evolve(params, grid, dw, dwp, None)
    return PathBatch(x, v, v_raw, dw, dwp, grid, rng)
