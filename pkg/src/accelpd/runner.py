"""One-call pipeline: oracle solve, integration and diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import DiagnosticRow, diagnostics_series
from .dynamics import DynamicsParams, SystemState, default_initial_state
from .integrator import IntegratorConfig, TrajectoryLog, integrate, make_log_schedule
from .problem import PrimalDualPoint, Problem, solve_kkt_oracle

__all__ = ["Simulation", "simulate", "analysis_schedule"]


def analysis_schedule(t0: float, t_end: float, samples: int) -> np.ndarray:
    """Log-spaced schedule that also contains ``t_end/2`` and ``t_end/4``.

    The extra points are the anchors of the Cauchy-tail test.
    """
    ts = make_log_schedule(t0, t_end, samples)
    extra = [t for t in (t_end / 4, t_end / 2) if t > t0]
    return np.union1d(ts, extra)


@dataclass
class Simulation:
    problem: Problem
    params: DynamicsParams
    z_star: PrimalDualPoint
    log: TrajectoryLog
    rows: list[DiagnosticRow]
    seconds: float
    rel_tol: float
    abs_tol: float

    @property
    def completed(self) -> bool:
        return self.log.termination.completed


def simulate(
    problem: Problem,
    params: DynamicsParams,
    t_end: float,
    *,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
    samples: int = 400,
    t0: float = 1.0,
    initial: Optional[SystemState] = None,
    max_steps: Optional[int] = None,
    z_star: Optional[PrimalDualPoint] = None,
    unvalidated: bool = False,
) -> Simulation:
    """Solve for a reference point, integrate from ``initial`` and tabulate diagnostics.

    ``initial`` defaults to :func:`~accelpd.dynamics.default_initial_state`.
    Diagnostics of partial runs cover the samples that were reached.
    """
    start = time.perf_counter()
    if z_star is None:
        z_star = solve_kkt_oracle(problem, tol=1e-10)
    if initial is None:
        initial = default_initial_state(problem, z_star, t0)
    cfg = IntegratorConfig(
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        sample_schedule=analysis_schedule(initial.t, t_end, samples),
    )
    if max_steps is not None:
        cfg.max_steps = max_steps
    log = integrate(problem, params, initial, t_end, cfg, unvalidated=unvalidated)
    rows = diagnostics_series(log, problem, params, z_star, allow_partial=True) if len(log) else []
    return Simulation(problem, params, z_star, log, rows, time.perf_counter() - start, rel_tol, abs_tol)
