"""Importance-sampling Monte Carlo for the Heston model.

Drift changes come from small-noise/small-time large-deviations reductions,
moderate-deviations reductions (log-price, price, small-time, large-time), and
a deterministic-volatility baseline, all cross-checked against a reduced-basis
variational optimizer. The bench module measures variance reduction against
classic and antithetic estimators.
"""

from .errors import DomainError, NumericalError, OptimError
from .model import EQUITY_PARAMS, HestonParams, SVCoefficients, TimeGrid, validate
from .payoff import PayoffKind, PayoffSpec, WeightPath, make_payoff
from .measure import DriftMode, DriftSchedule
from .sim import PathBatch, RngSpec

__all__ = [
    "DomainError",
    "NumericalError",
    "OptimError",
    "EQUITY_PARAMS",
    "HestonParams",
    "SVCoefficients",
    "TimeGrid",
    "validate",
    "PayoffKind",
    "PayoffSpec",
    "WeightPath",
    "make_payoff",
    "DriftMode",
    "DriftSchedule",
    "PathBatch",
    "RngSpec",
]
