"""Quantities along a trajectory and empirical rate tests."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .dynamics import DynamicsParams, SystemState
from .integrator import TrajectoryLog
from .problem import ContractError, PrimalDualPoint, Problem, kkt_residual

__all__ = [
    "DiagnosticRow",
    "RateEstimate",
    "EstimationError",
    "ConvergenceReport",
    "COLUMNS",
    "energy",
    "lagrangian_gap",
    "diagnostics_series",
    "column",
    "estimate_rate",
    "check_o_rate",
    "trajectory_convergence_check",
    "energy_excess",
    "velocity_bound_ratio",
]

# values at or below this are treated as numerically zero in rate fits
RATE_FLOOR = 1e-14


class EstimationError(ValueError):
    """Not enough data for a rate estimate."""


@dataclass(frozen=True)
class DiagnosticRow:
    t: float
    f_gap: float
    feas: float
    vel: float
    energy: float
    lag_gap: float
    bregman: float
    grad_resid: float
    dual_resid: float
    stat_resid: float
    acc_tDf: float
    acc_tv2: float
    acc_tgap: float

    def as_tuple(self) -> tuple:
        return astuple(self)


COLUMNS = tuple(f.name for f in fields(DiagnosticRow))


@dataclass
class RateEstimate:
    """Outcome of :func:`estimate_rate` or :func:`check_o_rate`.

    ``slope_ci`` is the 95% half-width of the least-squares slope.
    ``tail_sups`` and ``o_rate_pass`` are only filled by :func:`check_o_rate`.
    """

    quantity: str
    slope: float
    slope_ci: float
    tail_sups: list = None
    o_rate_pass: Optional[bool] = None
    power: Optional[float] = None
    n_points: int = 0
    excluded: int = 0

    def __post_init__(self):
        if self.tail_sups is None:
            self.tail_sups = []

    @property
    def tail_ratio(self) -> float:
        """``s_last / max_k s_k``; nan when no windows were evaluated."""
        if not self.tail_sups:
            return math.nan
        return self.tail_sups[-1] / max(self.tail_sups)

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "slope": self.slope,
            "slope_ci": self.slope_ci,
            "tail_sups": list(self.tail_sups),
            "o_rate_pass": self.o_rate_pass,
            "power": self.power,
            "n_points": self.n_points,
            "excluded": self.excluded,
        }


def _delta(params: DynamicsParams, t: float) -> float:
    return params.scaling.delta(t)


def energy(state: SystemState, params: DynamicsParams, z_star: PrimalDualPoint, problem: Problem) -> float:
    """Lyapunov energy of ``state`` relative to ``z_star``.

    ``theta^2 t^2 delta(t) [L(x, lam*) - L(x*, lam)] + |v|^2/2 + xi/2 |z - z*|^2``
    with ``v = z - z* + theta t z'`` and ``xi = theta alpha - theta - 1``; ``L``
    is the augmented Lagrangian with penalty ``beta``.
    """
    if state.x.size != problem.n or state.lam.size != problem.m:
        raise ContractError("state dimensions do not match the problem")
    z_star.check_dims(problem)
    t, th = state.t, params.theta
    gap = lagrangian_gap(problem, state.x, state.lam, z_star, params.beta)
    dz = state.z - z_star.z
    v = dz + th * t * state.z_dot
    return float(th * th * t * t * _delta(params, t) * gap + 0.5 * (v @ v) + 0.5 * params.xi * (dz @ dz))


def lagrangian_gap(problem: Problem, x, lam, z_star: PrimalDualPoint, beta: float) -> float:
    """``L(x, lam*) - L(x*, lam)``, evaluated without cancelling ``f(x*)``."""
    r = problem.constraint.residual(x)
    r_star = problem.constraint.residual(z_star.x)
    return float(
        problem.objective.gap(x, z_star.x)
        + z_star.lam @ r
        - lam @ r_star
        + 0.5 * beta * (r @ r - r_star @ r_star)
    )


def _cumtrapz(t, y):
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def diagnostics_series(
    log: TrajectoryLog,
    problem: Problem,
    params: DynamicsParams,
    z_star: PrimalDualPoint,
    allow_partial: bool = False,
) -> list[DiagnosticRow]:
    """One :class:`DiagnosticRow` per logged sample.

    The accumulators integrate ``t D_f``, ``t |z'|^2`` and ``t`` times the
    Lagrangian gap with the trapezoid rule over the sample times.  The
    integrands are clipped at zero first so that rounding in quantities
    that are nonnegative in exact arithmetic cannot make the running
    integrals decrease.
    """
    if not log.termination.completed and not allow_partial:
        raise ContractError(f"log terminated with {log.termination}; pass allow_partial=True")
    z_star.check_dims(problem)
    f = problem.objective
    A, b = problem.A, problem.b
    xs, ls = z_star.x, z_star.lam
    g_star = f.gradient(xs)
    beta = params.beta
    rows = []
    k = len(log)
    cols = {name: np.empty(k) for name in COLUMNS[:10]}
    for i, state in enumerate(log.samples):
        x, lam = state.x, state.lam
        gx = f.gradient(x)
        r = A @ x - b
        gap = lagrangian_gap(problem, x, lam, z_star, beta)
        cols["t"][i] = state.t
        cols["f_gap"][i] = f.gap(x, xs)
        cols["feas"][i] = np.linalg.norm(r)
        cols["vel"][i] = np.linalg.norm(state.z_dot)
        cols["energy"][i] = energy(state, params, z_star, problem)
        cols["lag_gap"][i] = gap
        cols["bregman"][i] = f.bregman(xs, x)
        cols["grad_resid"][i] = np.linalg.norm(gx - g_star)
        cols["dual_resid"][i] = np.linalg.norm(A.T @ (lam - ls))
        cols["stat_resid"][i] = np.linalg.norm(gx + A.T @ lam)
    t = cols["t"]
    acc_df = _cumtrapz(t, t * np.maximum(cols["bregman"], 0.0))
    acc_v2 = _cumtrapz(t, t * cols["vel"] ** 2)
    acc_gap = _cumtrapz(t, t * np.maximum(cols["lag_gap"], 0.0))
    for i in range(k):
        rows.append(
            DiagnosticRow(
                *(float(cols[name][i]) for name in COLUMNS[:10]),
                float(acc_df[i]),
                float(acc_v2[i]),
                float(acc_gap[i]),
            )
        )
    return rows


def column(series: Sequence[DiagnosticRow], quantity: str) -> np.ndarray:
    if quantity not in COLUMNS:
        raise ContractError(f"unknown quantity {quantity!r}; expected one of {COLUMNS}")
    return np.array([getattr(r, quantity) for r in series], dtype=float)


def _window(series, quantity, t_min, t_max):
    t = column(series, "t")
    q = np.abs(column(series, quantity))
    sel = (t >= t_min) & (t <= t_max)
    return t[sel], q[sel]


def _ols(logt, logq):
    n = logt.size
    slope, intercept = np.polyfit(logt, logq, 1)
    if n < 3:
        return float(slope), math.inf
    resid = logq - (slope * logt + intercept)
    s2 = resid @ resid / (n - 2)
    sxx = np.sum((logt - logt.mean()) ** 2)
    se = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return float(slope), float(stats.t.ppf(0.975, n - 2) * se)


def estimate_rate(series: Sequence[DiagnosticRow], quantity: str, t_min: float, t_max: float) -> RateEstimate:
    """Least-squares slope of ``log |q|`` against ``log t`` on ``[t_min, t_max]``.

    Absolute values are used so that a signed column such as ``f_gap`` is
    fitted as ``|f_gap|``.  Samples with ``|q| <= 1e-14`` are excluded and
    counted in ``excluded``.
    """
    t, q = _window(series, quantity, t_min, t_max)
    keep = q > RATE_FLOOR
    excluded = int(q.size - keep.sum())
    if keep.sum() < 10:
        raise EstimationError(
            f"{quantity}: only {int(keep.sum())} samples above {RATE_FLOOR:g} in "
            f"[{t_min:g}, {t_max:g}], need at least 10"
        )
    slope, ci = _ols(np.log(t[keep]), np.log(q[keep]))
    return RateEstimate(quantity, slope, ci, n_points=int(keep.sum()), excluded=excluded)


def check_o_rate(
    series: Sequence[DiagnosticRow],
    quantity: str,
    power: float = 2.0,
    windows: int = 4,
    decay_factor: float = 0.5,
) -> RateEstimate:
    """Dyadic tail-supremum test for ``t**power * |q(t)| -> 0``.

    The last ``windows`` dyadic intervals ``[T/2**k, T/2**(k-1)]`` ending at
    the final time ``T`` are examined.  With ``s_k`` the supremum of
    ``t**power |q|`` over window ``k`` (oldest first), the test passes iff
    ``s_last <= decay_factor * max(s)`` and ``s_last <= s_{last-1}``.
    """
    if not 0 < decay_factor < 1:
        raise ContractError(f"decay_factor must lie in (0, 1), got {decay_factor}")
    if int(windows) != windows or windows < 2:
        raise ContractError(f"windows must be an integer >= 2, got {windows}")
    t = column(series, "t")
    q = np.abs(column(series, quantity))
    T = t[-1]
    t_start = T / 2.0**windows
    if t[0] > t_start * (1 + 1e-12):
        raise EstimationError(
            f"series starts at t={t[0]:g} but {windows} dyadic windows ending at "
            f"{T:g} need data from t={t_start:g}"
        )
    sups = []
    for k in range(windows, 0, -1):
        lo, hi = T / 2.0**k, T / 2.0 ** (k - 1)
        sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
        if not sel.any():
            raise EstimationError(f"no samples in window [{lo:g}, {hi:g}]")
        sups.append(float(np.max(t[sel] ** power * q[sel])))
    passed = sups[-1] <= decay_factor * max(sups) and sups[-1] <= sups[-2]
    sel = (t >= t_start * (1 - 1e-12)) & (q > RATE_FLOOR)
    if sel.sum() >= 3:
        slope, ci = _ols(np.log(t[sel]), np.log(q[sel]))
    else:
        slope, ci = math.nan, math.nan
    return RateEstimate(
        quantity,
        slope,
        ci,
        tail_sups=sups,
        o_rate_pass=bool(passed),
        power=float(power),
        n_points=int(sel.sum()),
        excluded=int(((t >= t_start * (1 - 1e-12)) & (q <= RATE_FLOOR)).sum()),
    )


@dataclass
class ConvergenceReport:
    passed: bool
    reason: str
    limit: Optional[PrimalDualPoint]
    feas: float = math.nan
    stat: float = math.nan
    cauchy_last: float = math.nan
    cauchy_prev: float = math.nan

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "reason": self.reason,
            "limit": None if self.limit is None else {
                "x": self.limit.x.tolist(), "lambda": self.limit.lam.tolist()},
            "feas": self.feas,
            "stat": self.stat,
            "cauchy_last": self.cauchy_last,
            "cauchy_prev": self.cauchy_prev,
        }


def trajectory_convergence_check(
    log: TrajectoryLog, problem: Problem, tol_kkt: float = 1e-3, tol_cauchy: float = 1e-2
) -> ConvergenceReport:
    """Decide whether ``z(t)`` has settled at a primal-dual solution.

    Passes iff both KKT residuals of the final state are ``<= tol_kkt``,
    ``|z(T) - z(T/2)| <= tol_cauchy`` and ``|z(T/2) - z(T/4)| >=
    |z(T) - z(T/2)|``.  The states at ``T/2`` and ``T/4`` are the logged
    samples nearest to those times, so schedules should contain them.
    """
    if not log.termination.completed:
        return ConvergenceReport(False, f"integration ended with {log.termination}", None)
    if len(log) < 3:
        return ConvergenceReport(False, "fewer than three samples", None)
    T = log.times[-1]
    z = log.z
    i2 = int(np.argmin(np.abs(log.times - T / 2)))
    i4 = int(np.argmin(np.abs(log.times - T / 4)))
    n = problem.n
    limit = PrimalDualPoint(z[-1, :n], z[-1, n:])
    feas, stat = kkt_residual(problem, limit)
    d_last = float(np.linalg.norm(z[-1] - z[i2]))
    d_prev = float(np.linalg.norm(z[i2] - z[i4]))
    reasons = []
    if feas > tol_kkt:
        reasons.append(f"feasibility {feas:.3e} > {tol_kkt:g}")
    if stat > tol_kkt:
        reasons.append(f"stationarity {stat:.3e} > {tol_kkt:g}")
    if d_last > tol_cauchy:
        reasons.append(f"|z(T)-z(T/2)| = {d_last:.3e} > {tol_cauchy:g}")
    if d_prev < d_last:
        reasons.append("displacement increased over the last doubling")
    return ConvergenceReport(
        not reasons, "; ".join(reasons) or "ok", limit, feas, stat, d_last, d_prev
    )


def energy_excess(series: Sequence[DiagnosticRow], rel_tol: float) -> float:
    """Largest energy increase between consecutive samples beyond the drift budget.

    The budget per sample interval is ``1e3 * rel_tol * (1 + E(t0))``.  A
    value ``<= 0`` means the sampled energy is nonincreasing within budget.
    """
    e = column(series, "energy")
    if e.size < 2:
        return -math.inf
    budget = 1e3 * rel_tol * (1.0 + e[0])
    return float(np.max(np.diff(e)) - budget)


def velocity_bound_ratio(series: Sequence[DiagnosticRow]) -> float:
    """``max t*vel`` over all samples divided by its maximum over the first decade."""
    t = column(series, "t")
    tv = t * column(series, "vel")
    first = tv[t <= 10.0 * t[0]]
    ref = first.max()
    if ref == 0:
        return 0.0 if tv.max() == 0 else math.inf
    return float(tv.max() / ref)
