"""Reduced-basis optimizer for drift variational problems.

Problems have the shape sup_x { F(paths induced by x) - penalty(x) } over one
or two channels of square-integrable derivatives. The search space is a small
basis per channel (problem-aware atoms plus piecewise-linear hats); Nelder-Mead
runs from a fixed set of deterministic starts. This is the independent check
applied to every closed-form drift pipeline and the fallback optimizer for
payoffs without a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, OptimError
from .model import TimeGrid

#: Objective sentinel standing in for -inf (unreachable payoff, rejected path).
NEG_SENTINEL = -1e18

MAX_BASIS_PER_CHANNEL = 64


@dataclass
class VariationalProblem:
    """Objective over channel derivative paths, with a reduced basis per channel.

    ``objective`` receives one array per channel (values on the grid knots) and
    returns the full objective value, penalty included; NEG_SENTINEL marks
    inadmissible points. ``basis`` holds one (m_ch, n_knots) matrix per channel.
    ``seed_coeffs`` are coefficient vectors used for the deterministic
    multi-starts; by convention the first rows of each basis are the
    problem-aware atoms, so unit vectors there are meaningful starts.
    """

    objective: Callable[..., float]
    basis: list[np.ndarray]
    grid: TimeGrid
    seed_coeffs: list[np.ndarray] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        for b in self.basis:
            if b.shape[0] > MAX_BASIS_PER_CHANNEL:
                raise DomainError("at most 64 basis functions per channel")
            if b.shape[1] != self.grid.n_steps + 1:
                raise DomainError("basis rows must be sampled on the grid knots")

    @property
    def n_coeffs(self) -> int:
        return sum(b.shape[0] for b in self.basis)

    def expand(self, coeffs: np.ndarray) -> list[np.ndarray]:
        coeffs = np.asarray(coeffs, dtype=float)
        out, k = [], 0
        for b in self.basis:
            m = b.shape[0]
            out.append(coeffs[k : k + m] @ b)
            k += m
        return out

    def value(self, coeffs: np.ndarray) -> float:
        val = self.objective(*self.expand(coeffs))
        if not np.isfinite(val):
            return NEG_SENTINEL
        return float(val)


def hat_basis(grid: TimeGrid, m: int) -> np.ndarray:
    """m piecewise-linear hats with uniform nodes spanning [0, t_end], sampled on knots."""
    nodes = np.linspace(0.0, grid.t_end, m)
    t = grid.knots
    rows = np.empty((m, t.size))
    width = nodes[1] - nodes[0] if m > 1 else grid.t_end
    for j, c in enumerate(nodes):
        rows[j] = np.clip(1.0 - np.abs(t - c) / width, 0.0, None)
    return rows


def atom_basis(profiles: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack([np.asarray(p, dtype=float) for p in profiles])


def stack_basis(*blocks: np.ndarray) -> np.ndarray:
    return np.vstack(blocks)


def embed_profiles(problem: VariationalProblem, profiles: list[np.ndarray]) -> np.ndarray:
    """Coefficients reproducing the given channel profiles via least squares.

    Exact whenever the profiles lie in the basis span (in particular when they
    are atoms of the basis).
    """
    coeffs = []
    for b, p in zip(problem.basis, profiles):
        sol, *_ = np.linalg.lstsq(b.T, np.asarray(p, dtype=float), rcond=None)
        coeffs.append(sol)
    return np.concatenate(coeffs)


def _default_starts(problem: VariationalProblem) -> list[np.ndarray]:
    n = problem.n_coeffs
    starts = [np.zeros(n)]
    seeds = list(problem.seed_coeffs)
    if not seeds:
        e = np.zeros(n)
        e[0] = 1.0
        seeds = [e]
    s0 = np.asarray(seeds[0], dtype=float)
    starts += [s0, -s0]
    s1 = np.asarray(seeds[1], dtype=float) if len(seeds) > 1 else 2.0 * s0
    starts += [s1, -s1]
    return starts


def solve(
    problem: VariationalProblem,
    init: np.ndarray | None = None,
    budget: int = 4000,
) -> tuple[np.ndarray, float]:
    """Maximize over the basis coefficients; deterministic given (init, budget).

    Runs Nelder-Mead from five fixed starts (zero, +/- the seed atoms) plus the
    optional ``init``; returns the best point seen, which is never below the
    objective at any start. Raises OptimError when every start is inadmissible
    and no admissible point was found.
    """
    starts = _default_starts(problem)
    if init is not None:
        starts.append(np.asarray(init, dtype=float))
    per_start = max(50, budget // len(starts))

    best_c, best_v = None, NEG_SENTINEL
    for x0 in starts:
        v0 = problem.value(x0)
        if v0 > best_v:
            best_c, best_v = np.array(x0), v0
        res = optimize.minimize(
            lambda c: -problem.value(c),
            x0,
            method="Nelder-Mead",
            options={
                "maxfev": per_start,
                "xatol": 1e-8,
                "fatol": 1e-10,
                "adaptive": True,
            },
        )
        if -res.fun > best_v:
            best_c, best_v = res.x, -res.fun
    if best_v <= NEG_SENTINEL / 2:
        raise OptimError(f"no admissible point found for problem {problem.label!r}")
    return best_c, best_v


def local_optimality_check(
    problem: VariationalProblem,
    coeffs: np.ndarray,
    n_probes: int = 64,
    scale: float = 1e-3,
) -> bool:
    """True iff no random coordinate perturbation of size ``scale`` improves by > 1e-9."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(718_281_828)))
    base = problem.value(coeffs)
    c = np.asarray(coeffs, dtype=float)
    for _ in range(n_probes):
        j = int(gen.integers(0, c.size))
        sgn = 1.0 if gen.random() < 0.5 else -1.0
        probe = c.copy()
        probe[j] += sgn * scale
        if problem.value(probe) > base + 1e-9:
            return False
    return True
