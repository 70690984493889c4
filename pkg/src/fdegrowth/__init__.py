"""Growth-rate simulation and verification for scalar functional differential
equations ``x'(t) = int mu(ds) f(x(t+s))`` with sublinear ``f``."""

__version__ = "0.1.0"

from .asymptotics import (
    F_over_t_series,
    TheoremVerdict,
    check_hw_hypotheses,
    compute_hw_mu,
    delta_series,
    hw_experiment,
    ratio_series,
    time_grid,
    verify_growth_rate,
)
from .errors import (
    ConfigError,
    DomainError,
    FDEGrowthError,
    HypothesisViolation,
    QuadratureError,
    StepFailure,
    ValidationError,
)
from .integrator import HistoryFunction, StepControl, Trajectory, solve_fde, solve_ode
from .measure import Atom, DelayMeasure, DensityPiece, delay_moment, integrate_against, total_mass
from .nonlinearity import (
    LogGrid,
    LogPower,
    Nonlinearity,
    check_rv_index_fprime,
    estimate_lambda,
    make_nonlinearity,
    make_paper_example,
    make_perturbation,
)
from .rate_transform import RateTransform, check_F_asymptotics
from .series import DiagnosticSeries, LimitEstimate, aitken, classify_tail, extrapolate_limit

__all__ = [name for name in dir() if not name.startswith("_")]
