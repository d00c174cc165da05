"""Adaptive Dormand-Prince 5(4) integration with dense output.

The primal-dual coupling ``theta t A'lam'`` makes the velocities rotate with
angular frequency ``theta * t * delta(t) * sigma`` (``sigma`` a singular value
of ``A``), so the number of steps grows like ``t_end**2``.  The stepping loop is
therefore compiled with numba when the objective belongs to the polynomial /
exponential family of :class:`~accelpd.problem.PolyExpCoefficients`.  Other
objectives run the same loop as plain Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .dynamics import DynamicsParams, SystemState, validate_params
from .problem import ContractError, Problem

__all__ = [
    "IntegratorConfig",
    "Termination",
    "TrajectoryLog",
    "integrate",
    "make_log_schedule",
    "BLOWUP_THRESHOLD",
]

BLOWUP_THRESHOLD = 1e12

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# Shampine's continuous extension (order 4)
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

# step-size controller
SAFE, FAC_MIN, FAC_MAX, PI_BETA = 0.9, 0.2, 10.0, 0.04
EXPO1 = 0.2 - 0.75 * PI_BETA

STATUS_COMPLETED, STATUS_BLOWUP, STATUS_STEP_LIMIT = 0, 1, 2


def make_log_schedule(t0: float, t_end: float, count: int) -> np.ndarray:
    """Geometrically spaced times from ``t0`` to ``t_end`` inclusive."""
    if not (0 < t0 < t_end) or not math.isfinite(t_end):
        raise ContractError(f"need 0 < t0 < t_end, got t0={t0}, t_end={t_end}")
    if int(count) != count or count < 2:
        raise ContractError(f"count must be an integer >= 2, got {count}")
    ts = np.geomspace(t0, t_end, int(count))
    ts[0], ts[-1] = t0, t_end
    return ts


@dataclass
class IntegratorConfig:
    """Tolerances and limits for :func:`integrate`.

    ``sample_schedule`` overrides ``samples``; otherwise ``samples`` times are
    spaced geometrically between ``t0`` and ``t_end``.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    initial_step: float = 1e-3
    max_step: float = math.inf
    max_steps: int = 500_000_000
    sample_schedule: Optional[Sequence[float]] = None
    samples: int = 400

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ContractError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ContractError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.initial_step > 0 or not self.max_step > 0:
            raise ContractError("initial_step and max_step must be positive")
        if self.max_steps < 1:
            raise ContractError("max_steps must be positive")

    def schedule(self, t0: float, t_end: float) -> np.ndarray:
        if self.sample_schedule is None:
            return make_log_schedule(t0, t_end, self.samples)
        ts = np.asarray(self.sample_schedule, dtype=float)
        if ts.ndim != 1 or ts.size < 1 or np.any(np.diff(ts) <= 0):
            raise ContractError("sample_schedule must be strictly increasing")
        if ts[0] != t0 or ts[-1] > t_end:
            raise ContractError(f"sample_schedule must start at t0={t0} and stay within t_end={t_end}")
        return ts


@dataclass(frozen=True)
class Termination:
    kind: str  # completed, blowup or step-limit
    t: Optional[float] = None

    @property
    def completed(self) -> bool:
        return self.kind == "completed"

    def __str__(self):
        return self.kind if self.t is None else f"{self.kind}({self.t:.17g})"


@dataclass(eq=False)
class TrajectoryLog:
    """States at the sample schedule.

    ``states`` has one row per logged time in the ordering
    ``(x, lam, x', lam')``.  For partial runs only the times reached are
    logged.
    """

    times: np.ndarray
    states: np.ndarray
    n: int
    m: int
    step_stats: dict = field(default_factory=dict)
    termination: Termination = field(default_factory=lambda: Termination("completed"))

    def __len__(self):
        return self.times.size

    @property
    def samples(self) -> list[SystemState]:
        return [SystemState.from_vector(t, y, self.n) for t, y in zip(self.times, self.states)]

    @property
    def x(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def lam(self) -> np.ndarray:
        return self.states[:, self.n : self.n + self.m]

    @property
    def z(self) -> np.ndarray:
        return self.states[:, : self.n + self.m]

    @property
    def z_dot(self) -> np.ndarray:
        return self.states[:, self.n + self.m :]

    def state_at(self, t: float) -> SystemState:
        """Logged state at the sample time nearest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return SystemState.from_vector(self.times[k], self.states[k], self.n)


# --------------------------------------------------------------------------
# right-hand sides


@numba.njit(cache=True, inline="always")
def _polyexp_rhs(t, y, out, data):
    n, m, Q, c, w4, we, A, b, alpha, theta, beta, kind, sp, res = data
    N = n + m
    if kind == 0:
        d = 1.0
    elif kind == 1:
        d = t**sp
    else:
        d = math.exp(sp * t)
    damp = alpha / t
    tt = theta * t
    for i in range(m):
        acc = -b[i]
        for j in range(n):
            acc += A[i, j] * y[j]
        res[i] = acc
    for i in range(N):
        out[i] = y[N + i]
    for j in range(n):
        xj = y[j]
        g = c[j] + w4[j] * xj * xj * xj
        if we[j] != 0.0:
            g += we[j] * math.exp(xj)
        for k in range(n):
            g += Q[j, k] * y[k]
        for i in range(m):
            g += A[i, j] * (y[n + i] + tt * y[N + n + i] + beta * res[i])
        out[N + j] = -damp * y[N + j] - d * g
    for i in range(m):
        acc = res[i]
        for j in range(n):
            acc += A[i, j] * tt * y[N + j]
        out[N + n + i] = -damp * y[N + n + i] + d * acc


def _generic_rhs(t, y, out, data):
    problem, params = data
    n, m = problem.n, problem.m
    N = n + m
    x, lam, xd, ld = y[:n], y[n:N], y[N : N + n], y[N + n :]
    g = np.asarray(problem.objective.gradient(x), dtype=float)
    A, b = problem.A, problem.b
    d = params.scaling.delta(t)
    r = A @ x - b
    tt = params.theta * t
    out[:N] = y[N:]
    out[N : N + n] = -(params.alpha / t) * xd - d * (g + A.T @ (lam + tt * ld) + params.beta * (A.T @ r))
    out[N + n :] = -(params.alpha / t) * ld + d * (r + tt * (A @ xd))


# --------------------------------------------------------------------------
# stepping loop


def _dopri5(rhs, data, y0, t0, t_end, sched, rtol, atol, h0, hmax, max_steps, out):
    """Integrate from ``t0`` to ``t_end``, writing dense output rows into ``out``.

    Returns ``(status, t_reached, accepted, rejected, rows_written)``.
    """
    D = y0.size
    y = y0.copy()
    yn = np.empty(D)
    yt = np.empty(D)
    k1 = np.empty(D)
    k2 = np.empty(D)
    k3 = np.empty(D)
    k4 = np.empty(D)
    k5 = np.empty(D)
    k6 = np.empty(D)
    k7 = np.empty(D)
    t = t0
    rhs(t, y, k1, data)
    h = min(h0, hmax, t_end - t0)
    facold = 1e-4
    last_rejected = False
    accepted = 0
    rejected = 0
    ko = 0
    while ko < sched.size and sched[ko] <= t0:
        out[ko] = y0
        ko += 1
    status = STATUS_COMPLETED
    while t < t_end:
        if accepted + rejected >= max_steps:
            status = STATUS_STEP_LIMIT
            break
        if h < 16.0 * 2.220446049250313e-16 * abs(t):
            status = STATUS_BLOWUP
            break
        last = t + 1.01 * h >= t_end
        if last:
            h = t_end - t
        for i in range(D):
            yt[i] = y[i] + h * A21 * k1[i]
        rhs(t + C2 * h, yt, k2, data)
        for i in range(D):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(t + C3 * h, yt, k3, data)
        for i in range(D):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(t + C4 * h, yt, k4, data)
        for i in range(D):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(t + C5 * h, yt, k5, data)
        for i in range(D):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        t_new = t_end if last else t + h
        rhs(t_new, yt, k6, data)
        for i in range(D):
            yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        rhs(t_new, yn, k7, data)
        err = 0.0
        for i in range(D):
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc
            err += e * e
        err = math.sqrt(err / D)
        if not math.isfinite(err):
            # overflow inside a trial step; retry smaller, a true blow-up
            # ends through the step-size floor above
            rejected += 1
            h *= FAC_MIN
            last_rejected = True
            continue
        fac11 = err**EXPO1
        if err <= 1.0:
            fac = fac11 / facold**PI_BETA
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac / SAFE))
            h_new = h / fac
            if last_rejected:
                h_new = min(h_new, h)
            facold = max(err, 1e-4)
            accepted += 1
            last_rejected = False
            # dense output on (t, t_new]
            while ko < sched.size and sched[ko] <= t_new:
                if sched[ko] == t_new:
                    for i in range(D):
                        out[ko, i] = yn[i]
                else:
                    s = (sched[ko] - t) / h
                    s1 = 1.0 - s
                    for i in range(D):
                        r2 = yn[i] - y[i]
                        r3 = h * k1[i] - r2
                        r4 = r2 - h * k7[i] - r3
                        r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        out[ko, i] = y[i] + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)))
                ko += 1
            t = t_new
            blown = False
            for i in range(D):
                y[i] = yn[i]
                k1[i] = k7[i]
                if not abs(yn[i]) <= BLOWUP_THRESHOLD:
                    blown = True
            if blown:
                status = STATUS_BLOWUP
                break
            h = min(h_new, hmax)
        else:
            rejected += 1
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            last_rejected = True
    return status, t, accepted, rejected, ko


_dopri5_compiled = numba.njit(cache=True)(_dopri5)


def _polyexp_data(problem: Problem, params: DynamicsParams):
    co = problem.objective.coefficients
    sc = params.scaling
    return (
        problem.n,
        problem.m,
        np.ascontiguousarray(co.quad),
        np.ascontiguousarray(co.lin),
        np.ascontiguousarray(co.quartic),
        np.ascontiguousarray(co.exp),
        np.ascontiguousarray(problem.A),
        np.ascontiguousarray(problem.b),
        params.alpha,
        params.theta,
        params.beta,
        sc.code,
        sc.param,
        np.empty(problem.m),
    )


def integrate(
    problem: Problem,
    params: DynamicsParams,
    initial: SystemState,
    t_end: float,
    config: Optional[IntegratorConfig] = None,
    *,
    unvalidated: bool = False,
    compiled: Optional[bool] = None,
) -> TrajectoryLog:
    """Integrate the dynamics from ``initial`` to ``t_end``.

    Parameters
    ----------
    problem, params
        The problem and dynamics parameters.  ``params`` must pass
        :func:`~accelpd.dynamics.validate_params` in ``basic`` or
        ``scaled-basic`` mode unless ``unvalidated`` is set.
    initial
        Initial state; its time is the start time ``t0``.
    t_end
        Final time, ``> t0``.
    config
        Tolerances and sampling.  The schedule must start at ``t0``.
    compiled
        Force (``True``) or forbid (``False``) the numba kernel.  The default
        uses it whenever the objective carries polynomial/exponential
        coefficients.

    Returns
    -------
    TrajectoryLog
        Dense-output states at the schedule.  On blow-up or step-limit the
        log holds the samples reached so far.
    """
    config = config or IntegratorConfig()
    t0 = float(initial.t)
    if not t_end > t0:
        raise ContractError(f"t_end={t_end} must exceed t0={t0}")
    if initial.x.size != problem.n or initial.lam.size != problem.m:
        raise ContractError("initial state dimensions do not match the problem")
    if not unvalidated:
        if not (validate_params(params, "basic", t0) or validate_params(params, "scaled-basic", t0)):
            report = validate_params(params, "scaled-basic", t0)
            raise ContractError(
                "parameters fail basic and scaled-basic validation ("
                + "; ".join(report.violations)
                + "); pass unvalidated=True to run anyway"
            )
    sched = config.schedule(t0, float(t_end))
    y0 = initial.to_vector()
    out = np.zeros((sched.size, y0.size))
    if compiled is None:
        compiled = problem.objective.coefficients is not None
    if compiled:
        if problem.objective.coefficients is None:
            raise ContractError("compiled integration needs polynomial/exponential coefficients")
        result = _dopri5_compiled(
            _polyexp_rhs, _polyexp_data(problem, params), y0, t0, float(t_end), sched,
            config.rel_tol, config.abs_tol, config.initial_step, config.max_step,
            config.max_steps, out,
        )
    else:
        result = _dopri5(
            _generic_rhs, (problem, params), y0, t0, float(t_end), sched,
            config.rel_tol, config.abs_tol, config.initial_step, config.max_step,
            config.max_steps, out,
        )
    status, t_reached, accepted, rejected, rows = result
    # rows written before a failed step may still contain a non-finite state
    rows = int(rows)
    while rows > 0 and not np.isfinite(out[rows - 1]).all():
        rows -= 1
    if status == STATUS_COMPLETED:
        term = Termination("completed")
    elif status == STATUS_BLOWUP:
        term = Termination("blowup", float(t_reached))
    else:
        term = Termination("step-limit", float(t_reached))
    return TrajectoryLog(
        times=sched[:rows].copy(),
        states=out[:rows].copy(),
        n=problem.n,
        m=problem.m,
        step_stats={"accepted": int(accepted), "rejected": int(rejected)},
        termination=term,
    )
