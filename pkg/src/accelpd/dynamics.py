"""Right-hand side of the accelerated primal-dual system.

The second-order system

    x'' = -(alpha/t) x' - delta(t) [grad f(x) + A'(lam + theta t lam') + beta A'(Ax - b)]
    lam'' = -(alpha/t) lam' + delta(t) [A(x + theta t x') - b]

is reduced to first order with the state ordering ``(x, lam, x', lam')``.
``delta`` is a time-scaling function; ``delta = 1`` gives the unscaled
dynamics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .problem import ContractError, PrimalDualPoint, Problem, kkt_residual

__all__ = [
    "ScalingFunction",
    "DynamicsParams",
    "SystemState",
    "ValidationReport",
    "EvaluationError",
    "MODES",
    "rhs",
    "validate_params",
    "equilibrium_state",
    "default_initial_state",
]

MODES = ("basic", "strict", "scaled-basic", "scaled-strict")

# closed-interval checks tolerate representation error, e.g. 1/(alpha - 1)
_SLACK = 1e-12


class EvaluationError(ArithmeticError):
    """The objective returned a non-finite value during an rhs evaluation."""

    def __init__(self, t: float, x_norm: float):
        super().__init__(f"non-finite gradient at t={t:.6g}, ||x||={x_norm:.6g}")
        self.t = t
        self.x_norm = x_norm


@dataclass(frozen=True)
class ScalingFunction:
    """Time scaling ``delta(t)``.

    Use the constructors :meth:`unit`, :meth:`power` and :meth:`exponential`.
    ``param`` holds ``r`` for ``power`` and ``c`` for ``exponential``.
    """

    kind: str = "unit"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "power", "exponential"):
            raise ContractError(f"unknown scaling kind {self.kind!r}")
        if not math.isfinite(self.param):
            raise ContractError("scaling parameter must be finite")
        if self.kind == "unit" and self.param != 0.0:
            raise ContractError("unit scaling takes no parameter")

    @classmethod
    def unit(cls) -> "ScalingFunction":
        return cls("unit", 0.0)

    @classmethod
    def power(cls, r: float) -> "ScalingFunction":
        """``delta(t) = t**r``; ``t delta'/delta = r``."""
        return cls("power", float(r))

    @classmethod
    def exponential(cls, c: float) -> "ScalingFunction":
        """``delta(t) = exp(c t)``.

        The ratio ``t delta'/delta = c t`` is unbounded for ``c > 0``, so this
        scaling only makes sense on a finite horizon.  A warning is issued.
        """
        warnings.warn(
            "exponential scaling has an unbounded growth ratio t*delta'/delta; "
            "results are meaningful on a finite horizon only",
            stacklevel=2,
        )
        return cls("exponential", float(c))

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernel."""
        return {"unit": 0, "power": 1, "exponential": 2}[self.kind]

    def delta(self, t: float) -> float:
        if self.kind == "unit":
            return 1.0
        if self.kind == "power":
            return t**self.param
        return math.exp(self.param * t)

    def delta_dot(self, t: float) -> float:
        if self.kind == "unit":
            return 0.0
        if self.kind == "power":
            return self.param * t ** (self.param - 1.0)
        return self.param * math.exp(self.param * t)

    def ratio_bounds(self, t0: float) -> tuple[float, float]:
        """``(inf, sup)`` of ``t delta'(t) / delta(t)`` over ``[t0, inf)``."""
        if self.kind == "unit":
            return 0.0, 0.0
        if self.kind == "power":
            return self.param, self.param
        c = self.param
        if c > 0:
            return c * t0, math.inf
        if c < 0:
            return -math.inf, c * t0
        return 0.0, 0.0

    def lower_bound(self, t0: float) -> float:
        """``inf delta(t)`` over ``[t0, inf)``."""
        if self.kind == "unit":
            return 1.0
        if self.param >= 0:
            return self.delta(t0)
        return 0.0

    def t2_delta_diverges(self) -> bool:
        if self.kind == "unit":
            return True
        if self.kind == "power":
            return self.param > -2.0
        return self.param >= 0

    def to_dict(self) -> dict:
        if self.kind == "unit":
            return {"kind": "unit"}
        key = "r" if self.kind == "power" else "c"
        return {"kind": self.kind, key: self.param}


@dataclass(frozen=True)
class DynamicsParams:
    """Damping ``alpha``, extrapolation ``theta``, penalty ``beta`` and scaling."""

    alpha: float
    theta: float
    beta: float = 0.0
    scaling: ScalingFunction = field(default_factory=ScalingFunction.unit)

    def __post_init__(self):
        for name in ("alpha", "theta", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ContractError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, float(v))
        if self.beta < 0:
            raise ContractError(f"beta must be nonnegative, got {self.beta}")

    @property
    def xi(self) -> float:
        return self.theta * self.alpha - self.theta - 1.0


@dataclass(frozen=True, eq=False)
class SystemState:
    """Time ``t`` together with ``x``, ``lam`` and their velocities."""

    t: float
    x: np.ndarray
    lam: np.ndarray
    x_dot: np.ndarray
    lam_dot: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 0):
            raise ContractError(f"state time must be positive and finite, got {self.t}")
        for name in ("x", "lam", "x_dot", "lam_dot"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.ndim != 1:
                raise ContractError(f"{name} must be a vector")
            if not np.isfinite(v).all():
                raise ContractError(f"{name} has non-finite entries")
            object.__setattr__(self, name, v)
        if self.x.size != self.x_dot.size or self.lam.size != self.lam_dot.size:
            raise ContractError("velocity dimensions do not match positions")

    @classmethod
    def from_vector(cls, t: float, y: np.ndarray, n: int) -> "SystemState":
        m = (y.size - 2 * n) // 2
        return cls(t, y[:n], y[n : n + m], y[n + m : 2 * n + m], y[2 * n + m :])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.x_dot, self.lam_dot])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam])

    @property
    def z_dot(self) -> np.ndarray:
        return np.concatenate([self.x_dot, self.lam_dot])


def _check_state(state: SystemState, problem: Problem):
    if state.x.size != problem.n or state.lam.size != problem.m:
        raise ContractError(
            f"state has dims (n={state.x.size}, m={state.lam.size}); problem "
            f"expects (n={problem.n}, m={problem.m})"
        )


def rhs(state: SystemState, params: DynamicsParams, problem: Problem) -> np.ndarray:
    """Time derivative of ``(x, lam, x', lam')`` as one concatenated vector."""
    _check_state(state, problem)
    t = state.t
    A, b = problem.A, problem.b
    x, lam, xd, ld = state.x, state.lam, state.x_dot, state.lam_dot
    g = np.asarray(problem.objective.gradient(x), dtype=float)
    if not np.isfinite(g).all():
        raise EvaluationError(t, float(np.linalg.norm(x)))
    d = params.scaling.delta(t)
    r = A @ x - b
    tt = params.theta * t
    damp = params.alpha / t
    xdd = -damp * xd - d * (g + A.T @ (lam + tt * ld) + params.beta * (A.T @ r))
    ldd = -damp * ld + d * (r + tt * (A @ xd))
    return np.concatenate([xd, ld, xdd, ldd])


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    passed: bool
    violations: tuple[str, ...]

    def __bool__(self):
        return self.passed


def validate_params(params: DynamicsParams, mode: str = "basic", t0: float = 1.0) -> ValidationReport:
    """Check ``params`` against the assumptions of ``mode``.

    ``basic`` admits ``alpha >= 3`` and ``theta`` in the closed interval
    ``[1/(alpha-1), 1/2]``; ``strict`` requires ``alpha > 3`` and the open
    interval.  The scaled modes add conditions on ``delta`` over
    ``[t0, inf)``: ``sup t delta'/delta <= 1/theta - 2`` (strict ``<`` in
    ``scaled-strict``), a finite infimum of that ratio, ``delta`` bounded away
    from zero and ``t**2 delta(t) -> inf``.  The unscaled modes require unit
    scaling.  Failures are reported, never raised.
    """
    if mode not in MODES:
        raise ContractError(f"unknown validation mode {mode!r}; expected one of {MODES}")
    if not t0 > 0:
        raise ContractError(f"t0 must be positive, got {t0}")
    a, th, beta = params.alpha, params.theta, params.beta
    strict = mode.endswith("strict")
    out = []
    if beta < 0:
        out.append("beta >= 0")
    if strict:
        if not a > 3:
            out.append("alpha > 3")
        if not (a > 1 and 1.0 / (a - 1.0) < th < 0.5):
            out.append("theta in open interval (1/(alpha-1), 1/2)")
    else:
        if not a >= 3 - _SLACK:
            out.append("alpha >= 3")
        if not (a > 1 and 1.0 / (a - 1.0) - _SLACK <= th <= 0.5 + _SLACK):
            out.append("theta in [1/(alpha-1), 1/2]")
    sc = params.scaling
    if mode.startswith("scaled"):
        lo, hi = sc.ratio_bounds(t0)
        bound = 1.0 / th - 2.0 if th > 0 else -math.inf
        if strict and not hi < bound:
            out.append("sup t*delta'/delta < 1/theta - 2")
        elif not strict and not hi <= bound + _SLACK:
            out.append("sup t*delta'/delta <= 1/theta - 2")
        if lo == -math.inf:
            out.append("inf t*delta'/delta > -inf")
        if not sc.lower_bound(t0) > 0:
            out.append("delta >= delta0 > 0")
        if not sc.t2_delta_diverges():
            out.append("t^2 delta(t) -> inf")
    elif sc.kind != "unit":
        out.append("scaling = unit")
    return ValidationReport(mode, not out, tuple(out))


def equilibrium_state(problem: Problem, oracle_point: PrimalDualPoint, t0: float = 1.0) -> SystemState:
    """The stationary state ``(t0, x*, lam*, 0, 0)``."""
    oracle_point.check_dims(problem)
    res = max(kkt_residual(problem, oracle_point))
    if res > 1e-8:
        raise ContractError(f"oracle point has KKT residual {res:.3e} > 1e-8")
    return SystemState(
        t0, oracle_point.x.copy(), oracle_point.lam.copy(), np.zeros(problem.n), np.zeros(problem.m)
    )


def default_initial_state(problem: Problem, oracle_point: PrimalDualPoint, t0: float = 1.0,
                          offset: float = 1.0) -> SystemState:
    """``x0 = x* + offset`` componentwise, ``lam0 = 0``, zero velocities."""
    oracle_point.check_dims(problem)
    return SystemState(
        t0, oracle_point.x + offset, np.zeros(problem.m), np.zeros(problem.n), np.zeros(problem.m)
    )
