"""Accelerated primal-dual dynamics for linearly constrained convex problems."""

from .diagnostics import (
    DiagnosticRow,
    RateEstimate,
    check_o_rate,
    column,
    diagnostics_series,
    energy,
    estimate_rate,
    trajectory_convergence_check,
)
from .dynamics import (
    DynamicsParams,
    ScalingFunction,
    SystemState,
    default_initial_state,
    equilibrium_state,
    rhs,
    validate_params,
)
from .integrator import IntegratorConfig, TrajectoryLog, integrate, make_log_schedule
from .problem import (
    ContractError,
    LinearConstraint,
    ObjectiveFunction,
    OracleError,
    PrimalDualPoint,
    Problem,
    augmented_lagrangian,
    bregman_distance,
    catalog,
    kkt_residual,
    polyexp_objective,
    quadratic_problem,
    solve_kkt_oracle,
)
from .runner import Simulation, simulate

__version__ = "0.1.0"
