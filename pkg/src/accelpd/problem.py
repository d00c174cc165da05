"""Linearly constrained convex problems.

A :class:`Problem` couples a convex C^1 objective with a linear equality
constraint ``A x = b``.  The module also provides the augmented Lagrangian,
the Bregman distance of the objective, KKT residuals, a reference
primal-dual solver and a small catalog of test problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ContractError",
    "OracleError",
    "PolyExpCoefficients",
    "ObjectiveFunction",
    "LinearConstraint",
    "Problem",
    "PrimalDualPoint",
    "polyexp_objective",
    "quadratic_objective",
    "quadratic_problem",
    "augmented_lagrangian",
    "bregman_distance",
    "kkt_residual",
    "solve_kkt_oracle",
    "check_gradient",
    "check_convexity",
    "catalog",
    "CATALOG_NAMES",
]


class ContractError(ValueError):
    """Raised when an argument violates a documented precondition."""


class OracleError(RuntimeError):
    """Raised when the reference KKT solver cannot reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual achieved: {residual:.3e})")
        self.residual = residual


def _vector(v, name: str, size: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a vector, got shape {arr.shape}")
    if size is not None and arr.size != size:
        raise ContractError(f"{name} has length {arr.size}, expected {size}")
    return arr


@dataclass(frozen=True)
class PolyExpCoefficients:
    """Coefficients of ``f(x) = x'Qx/2 + c'x + sum(q_i x_i^4)/4 + sum(e_i exp(x_i))``.

    Every catalog objective belongs to this family.  Objectives that carry
    coefficients are integrated by the compiled kernel.
    """

    quad: np.ndarray
    lin: np.ndarray
    quartic: np.ndarray
    exp: np.ndarray

    @property
    def is_quadratic(self) -> bool:
        return not (np.any(self.quartic) or np.any(self.exp))


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """A convex, continuously differentiable objective on R^n.

    Only ``value`` and ``gradient`` are required.  ``hessian`` speeds up the
    Newton oracle and ``coefficients`` enables the compiled integrator.
    ``difference(x, y)`` and ``divergence(x_ref, x)`` may supply
    cancellation-free evaluations of ``f(x) - f(y)`` and of the Bregman
    distance; near a minimizer the naive formulas lose everything below
    ``eps * |f|``.  ``gradient_lipschitz`` is ``None`` when the gradient is
    not globally Lipschitz.
    """

    dim_n: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"
    gradient_lipschitz: Optional[float] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    coefficients: Optional[PolyExpCoefficients] = None
    difference: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    divergence: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __post_init__(self):
        if int(self.dim_n) != self.dim_n or self.dim_n < 1:
            raise ContractError(f"dim_n must be a positive integer, got {self.dim_n}")

    def gap(self, x, y) -> float:
        """``f(x) - f(y)``."""
        if self.difference is not None:
            return float(self.difference(x, y))
        return float(self.value(x) - self.value(y))

    def bregman(self, x_ref, x) -> float:
        """``f(x_ref) - f(x) - <grad f(x), x_ref - x>``."""
        if self.divergence is not None:
            return float(self.divergence(x_ref, x))
        return float(self.value(x_ref) - self.value(x) - self.gradient(x) @ (x_ref - x))


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """The affine constraint ``matrix_a @ x == rhs_b``."""

    matrix_a: np.ndarray
    rhs_b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix_a, dtype=float))
        b = _vector(self.rhs_b, "rhs_b", a.shape[0])
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix_a", a)
        object.__setattr__(self, "rhs_b", b)
        x_ls = np.linalg.lstsq(a, b, rcond=None)[0]
        gap = np.linalg.norm(a @ x_ls - b)
        if gap > 1e-10:
            raise ContractError(f"constraint set is empty: min ||Ax - b|| = {gap:.3e}")

    @property
    def m(self) -> int:
        return self.matrix_a.shape[0]

    @property
    def n(self) -> int:
        return self.matrix_a.shape[1]

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.matrix_a @ x - self.rhs_b


@dataclass(frozen=True, eq=False)
class Problem:
    """minimize f(x) subject to A x = b."""

    objective: ObjectiveFunction
    constraint: LinearConstraint
    label: str = field(default="")

    def __post_init__(self):
        if self.objective.dim_n != self.constraint.n:
            raise ContractError(
                f"objective has dimension {self.objective.dim_n} but A has "
                f"{self.constraint.n} columns"
            )
        if not self.label:
            object.__setattr__(self, "label", self.objective.label)

    @property
    def n(self) -> int:
        return self.constraint.n

    @property
    def m(self) -> int:
        return self.constraint.m

    @property
    def A(self) -> np.ndarray:
        return self.constraint.matrix_a

    @property
    def b(self) -> np.ndarray:
        return self.constraint.rhs_b


@dataclass(frozen=True, eq=False)
class PrimalDualPoint:
    """A pair ``(x, lambda)``; attribute ``lam`` holds the multiplier."""

    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vector(self.x, "x"))
        object.__setattr__(self, "lam", _vector(self.lam, "lambda"))

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam])

    def check_dims(self, problem: Problem) -> None:
        if self.x.size != problem.n or self.lam.size != problem.m:
            raise ContractError(
                f"point has dims (n={self.x.size}, m={self.lam.size}); problem "
                f"expects (n={problem.n}, m={problem.m})"
            )


# --------------------------------------------------------------------------
# objective builders


def polyexp_objective(n, quad=None, lin=None, quartic=None, exp=None, label="polyexp"):
    """Build an objective from :class:`PolyExpCoefficients`.

    Missing coefficient blocks default to zero.  ``quad`` must be symmetric
    positive semidefinite and ``quartic``/``exp`` nonnegative so that the
    result is convex.
    """
    q = np.zeros((n, n)) if quad is None else np.array(quad, dtype=float).reshape(n, n)
    c = np.zeros(n) if lin is None else _vector(lin, "lin", n).copy()
    w4 = np.zeros(n) if quartic is None else _vector(quartic, "quartic", n).copy()
    we = np.zeros(n) if exp is None else _vector(exp, "exp", n).copy()
    if not np.allclose(q, q.T, atol=1e-12):
        raise ContractError("quadratic coefficient matrix must be symmetric")
    if np.linalg.eigvalsh(q).min() < -1e-12 * max(1.0, np.abs(q).max()):
        raise ContractError("quadratic coefficient matrix must be positive semidefinite")
    if (w4 < 0).any() or (we < 0).any():
        raise ContractError("quartic and exponential weights must be nonnegative")
    for arr in (q, c, w4, we):
        arr.setflags(write=False)
    coeffs = PolyExpCoefficients(q, c, w4, we)
    use_exp = bool(we.any())

    def value(x):
        x = np.asarray(x, dtype=float)
        v = 0.5 * x @ q @ x + c @ x + 0.25 * np.sum(w4 * x**4)
        if use_exp:
            v += np.sum(we * np.exp(x))
        return float(v)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        g = q @ x + c + w4 * x**3
        if use_exp:
            g = g + we * np.exp(x)
        return g

    def hessian(x):
        x = np.asarray(x, dtype=float)
        d = 3.0 * w4 * x**2
        if use_exp:
            d = d + we * np.exp(x)
        return q + np.diag(d)

    def difference(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = x - y
        v = 0.5 * d @ q @ d + (q @ y + c) @ d + 0.25 * np.sum(w4 * d * (x + y) * (x * x + y * y))
        if use_exp:
            v += np.sum(we * np.exp(y) * np.expm1(d))
        return float(v)

    def divergence(x_ref, x):
        x_ref = np.asarray(x_ref, dtype=float)
        x = np.asarray(x, dtype=float)
        d = x_ref - x
        v = 0.5 * d @ q @ d + 0.25 * np.sum(w4 * d * d * (x_ref * x_ref + 2 * x_ref * x + 3 * x * x))
        if use_exp:
            v += np.sum(we * np.exp(x) * _expm1_minus_linear(d))
        return float(v)

    lipschitz = float(np.linalg.eigvalsh(q).max()) if coeffs.is_quadratic else None
    return ObjectiveFunction(
        dim_n=n,
        value=value,
        gradient=gradient,
        label=label,
        gradient_lipschitz=lipschitz,
        hessian=hessian,
        coefficients=coeffs,
        difference=difference,
        divergence=divergence,
    )


def _expm1_minus_linear(d):
    """``exp(d) - 1 - d`` without cancellation for small ``|d|``."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < 1e-2
    series = d * d * (1 / 2 + d * (1 / 6 + d * (1 / 24 + d * (1 / 120 + d / 720))))
    return np.where(small, series, np.expm1(d) - d)


def quadratic_objective(Q, c, label="quadratic"):
    """``f(x) = x'Qx/2 + c'x`` with ``Q`` symmetric positive semidefinite."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return polyexp_objective(Q.shape[0], quad=Q, lin=c, label=label)


def quadratic_problem(Q, c, A, b, label="quadratic"):
    return Problem(quadratic_objective(Q, c, label=label), LinearConstraint(A, b), label)


# --------------------------------------------------------------------------
# problem quantities


def augmented_lagrangian(problem: Problem, x, lam, beta: float) -> float:
    """``f(x) + <lam, Ax - b> + beta/2 ||Ax - b||^2``."""
    x = _vector(x, "x", problem.n)
    lam = _vector(lam, "lambda", problem.m)
    if beta < 0:
        raise ContractError(f"beta must be nonnegative, got {beta}")
    r = problem.constraint.residual(x)
    return float(problem.objective.value(x) + lam @ r + 0.5 * beta * (r @ r))


def bregman_distance(problem: Problem, x_ref, x) -> float:
    """``D_f(x_ref, x) = f(x_ref) - f(x) - <grad f(x), x_ref - x>``."""
    x_ref = _vector(x_ref, "x_ref", problem.n)
    x = _vector(x, "x", problem.n)
    return problem.objective.bregman(x_ref, x)


def kkt_residual(problem: Problem, point: PrimalDualPoint) -> tuple[float, float]:
    """Return ``(||Ax - b||, ||grad f(x) + A'lam||)``."""
    point.check_dims(problem)
    feas = np.linalg.norm(problem.constraint.residual(point.x))
    stat = np.linalg.norm(problem.objective.gradient(point.x) + problem.A.T @ point.lam)
    return float(feas), float(stat)


def _fd_hessian(grad, x, h=1e-6):
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h * (1.0 + abs(x[i]))
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * e[i])
    return 0.5 * (H + H.T)


def _min_norm_dual(problem: Problem, x: np.ndarray) -> np.ndarray:
    # minimum-norm least-squares solution of A' lam = -grad f(x)
    return np.linalg.lstsq(problem.A.T, -problem.objective.gradient(x), rcond=None)[0]


def _newton_kkt(problem, x, lam, tol, max_iter):
    A, b = problem.A, problem.b
    n, m = problem.n, problem.m
    grad = problem.objective.gradient
    hess = problem.objective.hessian or (lambda y: _fd_hessian(grad, y))

    def F(x, lam):
        return np.concatenate([grad(x) + A.T @ lam, A @ x - b])

    r = F(x, lam)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm <= tol:
            break
        K = np.block([[hess(x), A.T], [A, np.zeros((m, m))]])
        step = np.linalg.lstsq(K, -r, rcond=None)[0]
        s = 1.0
        while s > 1e-10:
            x_new, lam_new = x + s * step[:n], lam + s * step[n:]
            r_new = F(x_new, lam_new)
            norm_new = np.linalg.norm(r_new)
            if np.isfinite(norm_new) and norm_new <= (1 - 1e-4 * s) * norm:
                break
            s *= 0.5
        else:
            break
        x, lam, r, norm = x_new, lam_new, r_new, norm_new
    return x, lam, norm


def solve_kkt_oracle(problem: Problem, tol: float = 1e-10, max_iter: int = 100,
                     method: str = "auto") -> PrimalDualPoint:
    """Reference primal-dual solution ``(x*, lam*)`` with KKT residual <= tol.

    Quadratic objectives are solved through the saddle-point system
    ``[[Q, A'], [A, 0]] (x, lam) = (-c, b)`` by least squares, which yields the
    minimum-norm solution when the system is singular.  Other objectives go
    through damped Newton on the KKT map; if Newton stalls the dynamics are
    integrated for a long horizon and Newton is restarted from the endpoint.
    The returned multiplier is always the minimum-norm representative.
    ``method="newton"`` skips the linear solve even for quadratics.
    """
    if method not in ("auto", "newton"):
        raise ContractError(f"method must be 'auto' or 'newton', got {method!r}")
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    n, m = problem.n, problem.m
    A, b = problem.A, problem.b
    coeffs = problem.objective.coefficients
    if method == "auto" and coeffs is not None and coeffs.is_quadratic:
        K = np.block([[coeffs.quad, A.T], [A, np.zeros((m, m))]])
        sol = np.linalg.lstsq(K, np.concatenate([-coeffs.lin, b]), rcond=None)[0]
        x = sol[:n]
    else:
        x0 = np.linalg.lstsq(A, b, rcond=None)[0]
        x, lam, norm = _newton_kkt(problem, x0, np.zeros(m), tol, max_iter)
        if not norm <= tol:
            x, lam = _integrate_towards_solution(problem, x0)
            x, lam, norm = _newton_kkt(problem, x, lam, tol, max_iter)
    point = PrimalDualPoint(x, _min_norm_dual(problem, x))
    res = max(kkt_residual(problem, point))
    if not res <= tol:
        raise OracleError(f"KKT oracle failed on {problem.label!r}", res)
    return point


def _integrate_towards_solution(problem, x0):
    # deferred import: the integrator depends on this module
    from .dynamics import DynamicsParams, SystemState
    from .integrator import IntegratorConfig, integrate

    params = DynamicsParams(alpha=5.0, theta=0.3, beta=1.0)
    state = SystemState(1.0, x0, np.zeros(problem.m), np.zeros(problem.n), np.zeros(problem.m))
    log = integrate(problem, params, state, 1e3, IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9, samples=2))
    last = log.samples[-1]
    return last.x, last.lam


# --------------------------------------------------------------------------
# spot checks


def check_gradient(objective: ObjectiveFunction, rng=None, samples: int = 20, radius: float = 2.0) -> float:
    """Largest relative mismatch between ``gradient`` and central differences.

    Points are drawn uniformly from the cube ``|x_i| <= radius``; the step is
    ``1e-5 (1 + |x_i|)``.
    """
    rng = np.random.default_rng(rng)
    n = objective.dim_n
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-radius, radius, n)
        g = objective.gradient(x)
        fd = np.empty(n)
        for i in range(n):
            h = 1e-5 * (1.0 + abs(x[i]))
            e = np.zeros(n)
            e[i] = h
            fd[i] = (objective.value(x + e) - objective.value(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))
    return float(worst)


def check_convexity(objective: ObjectiveFunction, rng=None, samples: int = 100, radius: float = 2.0) -> bool:
    """Spot-check the chord inequality on random segments."""
    rng = np.random.default_rng(rng)
    f = objective.value
    for _ in range(samples):
        x = rng.uniform(-radius, radius, objective.dim_n)
        y = rng.uniform(-radius, radius, objective.dim_n)
        fx, fy = f(x), f(y)
        for s in (0.25, 0.5, 0.75):
            slack = 1e-12 * (1 + abs(fx) + abs(fy))
            if f((1 - s) * x + s * y) > (1 - s) * fx + s * fy + slack:
                return False
    return True


# --------------------------------------------------------------------------
# catalog

# Rows are orthogonal with norm 1/10, so both singular values equal 0.1.
# Small singular values keep the skew primal-dual coupling (rotation rate
# theta * t * sigma) cheap to resolve over t in [1, 1e4].
_A_BASE = 0.05 * np.array([[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0]])


def _rotation4():
    v = np.array([1.0, 2.0, -1.0, 1.0])
    return np.eye(4) - 2.0 * np.outer(v, v) / (v @ v)


def _quadratic_easy():
    c = np.array([0.1, -0.05, 0.0, 0.05])
    b = np.array([0.01, 0.005])
    return quadratic_problem(np.eye(4), c, _A_BASE, b, "quadratic-easy")


def _quadratic_illcond():
    H = _rotation4()
    Q = H @ np.diag([1e-2, 1e-1, 1.0, 1e2]) @ H.T
    Q = 0.5 * (Q + Q.T)
    c = np.array([0.1, 0.0, -0.1, 0.05])
    b = np.array([0.01, -0.005])
    return quadratic_problem(Q, c, _A_BASE, b, "quadratic-illcond")


def _quartic():
    obj = polyexp_objective(4, quad=np.eye(4), quartic=np.ones(4), label="quartic")
    return Problem(obj, LinearConstraint(_A_BASE, np.zeros(2)), "quartic")


def _expsum():
    obj = polyexp_objective(4, exp=np.ones(4), label="expsum")
    # x* = (-1, -1, -1, -1)
    b = _A_BASE @ -np.ones(4)
    return Problem(obj, LinearConstraint(_A_BASE, b), "expsum")


def _rank_deficient():
    A = np.vstack([_A_BASE, _A_BASE[:1]])
    b = np.array([0.01, 0.005, 0.01])
    c = np.array([0.1, -0.05, 0.0, 0.05])
    return quadratic_problem(np.eye(4), c, A, b, "rank-deficient")


def _unconstrained_quad():
    Q = np.diag([0.5, 1.0, 1.5, 2.0])
    c = np.array([0.5, -1.0, 0.25, 1.0])
    return quadratic_problem(Q, c, np.zeros((1, 4)), np.zeros(1), "unconstrained-quad")


def _unconstrained_quartic():
    obj = polyexp_objective(
        4, quad=np.eye(4), lin=[1.0, -0.5, 0.25, 0.0], quartic=np.ones(4), label="unconstrained-quartic"
    )
    return Problem(obj, LinearConstraint(np.zeros((1, 4)), np.zeros(1)), "unconstrained-quartic")


def _quadratic_flat():
    # weak curvature and weak coupling: the time-scaled dynamics reach their
    # asymptotic regime early while the rotation phase stays affordable
    A = 1e-2 * _A_BASE
    b = A @ np.array([0.375, 0.125, 0.375, 0.125])
    return quadratic_problem(1e-3 * np.eye(4), np.zeros(4), A, b, "quadratic-flat")


_CATALOG = {
    "quadratic-easy": _quadratic_easy,
    "quadratic-illcond": _quadratic_illcond,
    "quartic": _quartic,
    "expsum": _expsum,
    "rank-deficient": _rank_deficient,
    "unconstrained-quad": _unconstrained_quad,
    "unconstrained-quartic": _unconstrained_quartic,
    "quadratic-flat": _quadratic_flat,
}

CATALOG_NAMES = tuple(_CATALOG)


def catalog(name: str) -> Problem:
    """Return the named test problem.

    ``quartic``, ``expsum`` and ``unconstrained-quartic`` have gradients that
    are not globally Lipschitz.  ``rank-deficient`` repeats a constraint row
    so its multiplier is not unique.  The ``unconstrained-*`` entries use
    ``A = 0``, ``b = 0``.
    """
    try:
        return _CATALOG[name]()
    except KeyError:
        raise LookupError(
            f"unknown catalog problem {name!r}; valid names: {', '.join(CATALOG_NAMES)}"
        ) from None
