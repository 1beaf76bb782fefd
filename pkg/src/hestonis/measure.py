"""Girsanov reweighting for drift-shifted simulation.

The sampling measure shifts the Brownian increments by (m1, m2) dt per step,
with (m1, m2) = (h1_dot, h2_dot) for a deterministic drift and
(h1_dot, h2_dot) * sqrt(V_i) for an adaptive one. The unbiased estimator of
E_P[G] is G(Q-path) * Z^{-1} with, in the Q-increments dW^Q,

    log Z^{-1} = - sum_i [m1_i dW_i^Q + m2_i dW_i^{perp,Q}]
                 - 1/2 sum_i (m1_i^2 + m2_i^2) dt.

Weights are accumulated in log space and exponentiated once per path so that
far out-of-the-money schedules cannot overflow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import DomainError
from .model import HestonParams, TimeGrid
from . import payoff as payoff_mod

if TYPE_CHECKING:  # pragma: no cover
    from .sim import PathBatch


class DriftMode(enum.Enum):
    DETERMINISTIC = "deterministic"
    ADAPTIVE = "adaptive"
    PER_STEP_ADAPTIVE = "per_step_adaptive"


@dataclass(frozen=True)
class DriftSchedule:
    """Two-channel drift on the grid knots, plus the mode that interprets it.

    Deterministic entries are in 1/sqrt(time); adaptive entries are divided by
    the running volatility scale and multiplied back by sqrt(V_i) at simulation
    time. Per-step-adaptive schedules carry a generator callback instead of
    fixed arrays: step_fn(i, t_i, y_acc, v_i) -> (m1, m2) arrays over paths.
    """

    mode: DriftMode
    h1_dot: np.ndarray | None = None
    h2_dot: np.ndarray | None = None
    provenance: str = ""
    step_fn: Callable | None = None
    alpha_knots: np.ndarray | None = None

    def __post_init__(self):
        if self.mode is DriftMode.PER_STEP_ADAPTIVE:
            if self.step_fn is None or self.alpha_knots is None:
                raise DomainError("per-step schedule needs step_fn and alpha_knots")
            return
        if self.h1_dot is None or self.h2_dot is None:
            raise DomainError("fixed-mode schedule needs both channel arrays")
        h1 = np.asarray(self.h1_dot, dtype=float)
        h2 = np.asarray(self.h2_dot, dtype=float)
        if h1.shape != h2.shape or h1.ndim != 1:
            raise DomainError("channel arrays must be 1-d and equal length")
        if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
            raise DomainError("drift schedule entries must be finite")
        object.__setattr__(self, "h1_dot", h1)
        object.__setattr__(self, "h2_dot", h2)

    def check_grid(self, grid: TimeGrid) -> None:
        if self.mode is DriftMode.PER_STEP_ADAPTIVE:
            return
        if self.h1_dot.shape[0] != grid.n_steps + 1:
            raise DomainError(
                f"schedule length {self.h1_dot.shape[0]} does not match grid "
                f"({grid.n_steps + 1} knots)"
            )


def zero_drift(grid: TimeGrid) -> DriftSchedule:
    z = np.zeros(grid.n_steps + 1)
    return DriftSchedule(DriftMode.DETERMINISTIC, z, z.copy(), provenance="zero")


@dataclass(frozen=True)
class WeightedSample:
    """Per-path payoff under Q, log Z^{-1}, and their product (arrays, aligned)."""

    payoff: np.ndarray
    log_weight: np.ndarray
    product: np.ndarray


def _modulation(batch: "PathBatch", drift: DriftSchedule):
    """Per-step (m1, m2) with shape (n_paths, n_steps) for a fixed-mode schedule."""
    n = batch.grid.n_steps
    h1 = drift.h1_dot[:n][None, :]
    h2 = drift.h2_dot[:n][None, :]
    if drift.mode is DriftMode.DETERMINISTIC:
        return np.broadcast_to(h1, batch.dw.shape), np.broadcast_to(h2, batch.dw.shape)
    if drift.mode is DriftMode.ADAPTIVE:
        sqv = np.sqrt(batch.v[:, :n])
        return h1 * sqv, h2 * sqv
    raise DomainError("per-step schedules retain weights at simulation time")


def log_inverse_weight(batch: "PathBatch", drift: DriftSchedule) -> np.ndarray:
    """log Z^{-1} per path for a batch simulated under the same drift."""
    drift.check_grid(batch.grid)
    if drift.mode is DriftMode.PER_STEP_ADAPTIVE:
        if batch.log_inv_weight is None:
            raise DomainError("per-step batch is missing its retained weights")
        return batch.log_inv_weight
    m1, m2 = _modulation(batch, drift)
    dt = batch.grid.dt
    lin = (m1 * batch.dw).sum(axis=1) + (m2 * batch.dw_perp).sum(axis=1)
    quad = ((m1 * m1 + m2 * m2) * dt).sum(axis=1)
    return -lin - 0.5 * quad


def log_forward_weight(batch: "PathBatch", drift: DriftSchedule) -> np.ndarray:
    """log Z per path for a batch simulated under P (martingale diagnostics)."""
    drift.check_grid(batch.grid)
    m1, m2 = _modulation(batch, drift)
    dt = batch.grid.dt
    lin = (m1 * batch.dw).sum(axis=1) + (m2 * batch.dw_perp).sum(axis=1)
    quad = ((m1 * m1 + m2 * m2) * dt).sum(axis=1)
    return lin - 0.5 * quad


def reweighted_payoffs(
    batch: "PathBatch",
    drift: DriftSchedule,
    spec: payoff_mod.PayoffSpec,
    params: HestonParams,
) -> WeightedSample:
    """Payoff on the Q paths times exp(log Z^{-1})."""
    g = payoff_mod.evaluate(spec, params, batch.grid, batch.x, batch.v)
    logw = log_inverse_weight(batch, drift)
    return WeightedSample(payoff=g, log_weight=logw, product=g * np.exp(logw))
