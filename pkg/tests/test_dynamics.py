import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accelpd.dynamics import (
    DynamicsParams,
    EvaluationError,
    ScalingFunction,
    SystemState,
    default_initial_state,
    equilibrium_state,
    rhs,
    validate_params,
)
from accelpd.integrator import _polyexp_data, _polyexp_rhs
from accelpd.problem import (
    CATALOG_NAMES,
    ContractError,
    LinearConstraint,
    ObjectiveFunction,
    PrimalDualPoint,
    Problem,
    catalog,
    quadratic_problem,
    solve_kkt_oracle,
)


@pytest.fixture
def scalar_problem():
    return quadratic_problem([[1.0]], [0.0], [[1.0]], [0.0])


def state(t, x, lam, xd, ld):
    return SystemState(t, [x], [lam], [xd], [ld])


def random_state(rng, prob, t=None):
    return SystemState(
        rng.uniform(1, 100) if t is None else t,
        rng.normal(size=prob.n),
        rng.normal(size=prob.m),
        rng.normal(size=prob.n),
        rng.normal(size=prob.m),
    )


class TestRhs:
    def test_scalar_example(self, scalar_problem):
        out = rhs(state(1.0, 1, 0, 0, 0), DynamicsParams(3, 0.5, 0), scalar_problem)
        np.testing.assert_array_equal(out, [0, 0, -1, 1])

    def test_penalty_term(self, scalar_problem):
        out = rhs(state(1.0, 1, 0, 0, 0), DynamicsParams(3, 0.5, 2), scalar_problem)
        np.testing.assert_array_equal(out, [0, 0, -3, 1])

    @pytest.mark.parametrize("name", CATALOG_NAMES)
    def test_zero_at_solution(self, name):
        prob = catalog(name)
        z = solve_kkt_oracle(prob)
        out = rhs(equilibrium_state(prob, z, 1.0), DynamicsParams(5, 0.3, 1.0), prob)
        assert np.linalg.norm(out) <= 1e-10

    def test_nonpositive_time(self):
        for t in (0.0, -1.0):
            with pytest.raises(ContractError):
                state(t, 1, 0, 0, 0)

    def test_nonfinite_gradient(self):
        obj = ObjectiveFunction(1, lambda x: 0.0, lambda x: np.array([np.nan]))
        prob = Problem(obj, LinearConstraint([[0.0]], [0.0]))
        with pytest.raises(EvaluationError) as info:
            rhs(state(2.5, 3.0, 0, 0, 0), DynamicsParams(3, 0.5), prob)
        assert info.value.t == 2.5 and info.value.x_norm == 3.0

    def test_dimension_mismatch(self, scalar_problem):
        with pytest.raises(ContractError):
            rhs(SystemState(1.0, [1.0, 2.0], [0.0], [0.0, 0.0], [0.0]), DynamicsParams(3, 0.5), scalar_problem)

    @pytest.mark.parametrize("name", ["unconstrained-quad", "unconstrained-quartic"])
    def test_unconstrained_reduction(self, name):
        prob = catalog(name)
        params = DynamicsParams(3.0, 0.5, 1.5)
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = random_state(rng, prob)
            expected = -(params.alpha / s.t) * s.x_dot - 1.0 * prob.objective.gradient(s.x)
            np.testing.assert_array_equal(rhs(s, params, prob)[prob.n + prob.m : 2 * prob.n + prob.m], expected)

    def test_unit_scaling_identity(self):
        prob = catalog("quadratic-illcond")
        A, b = prob.A, prob.b
        a, th, be = 3.5, 0.45, 0.7
        params = DynamicsParams(a, th, be)
        rng = np.random.default_rng(11)
        for _ in range(100):
            s = random_state(rng, prob)
            t, x, lam, xd, ld = s.t, s.x, s.lam, s.x_dot, s.lam_dot
            g = prob.objective.gradient(x)
            r = A @ x - b
            xdd = -(a / t) * xd - 1.0 * (g + A.T @ (lam + th * t * ld) + be * (A.T @ r))
            ldd = -(a / t) * ld + 1.0 * (r + th * t * (A @ xd))
            np.testing.assert_array_equal(rhs(s, params, prob), np.concatenate([xd, ld, xdd, ldd]))

    def test_affine_in_dual(self):
        prob = catalog("quartic")
        params = DynamicsParams(3, 0.5, 1.0)
        rng = np.random.default_rng(5)
        n, m = prob.n, prob.m
        for _ in range(20):
            s = random_state(rng, prob)
            l1, l2 = rng.normal(size=(2, m))
            pts = []
            for w in (0.0, 0.5, 1.0):
                lam = (1 - w) * l1 + w * l2
                st_ = SystemState(s.t, s.x, lam, s.x_dot, s.lam_dot)
                pts.append(rhs(st_, params, prob)[n + m : 2 * n + m])
            np.testing.assert_allclose(pts[1], 0.5 * (pts[0] + pts[2]), rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("name", CATALOG_NAMES)
    @pytest.mark.parametrize(
        "scaling", [ScalingFunction.unit(), ScalingFunction.power(0.7)], ids=["unit", "power"]
    )
    def test_compiled_kernel_matches(self, name, scaling):
        prob = catalog(name)
        params = DynamicsParams(4.0, 0.4, 0.5, scaling)
        data = _polyexp_data(prob, params)
        rng = np.random.default_rng(17)
        for _ in range(20):
            s = random_state(rng, prob)
            out = np.empty(2 * (prob.n + prob.m))
            _polyexp_rhs(s.t, s.to_vector(), out, data)
            np.testing.assert_allclose(out, rhs(s, params, prob), rtol=1e-12, atol=1e-12)


class TestScaling:
    def test_unit(self):
        s = ScalingFunction.unit()
        assert s.delta(7.0) == 1.0 and s.delta_dot(7.0) == 0.0

    @given(r=st.floats(-1.5, 3), t=st.floats(1, 1e4))
    def test_power_ratio(self, r, t):
        s = ScalingFunction.power(r)
        assert t * s.delta_dot(t) / s.delta(t) == pytest.approx(r, rel=1e-12, abs=1e-12)
        assert s.ratio_bounds(1.0) == (r, r)

    def test_exponential_warns(self):
        with pytest.warns(UserWarning, match="finite horizon"):
            s = ScalingFunction.exponential(0.1)
        assert s.delta(10.0) == pytest.approx(math.e)
        assert s.ratio_bounds(1.0)[1] == math.inf


class TestValidate:
    def test_endpoint_basic(self):
        assert validate_params(DynamicsParams(3, 0.5, 0), "basic").passed

    def test_endpoint_strict_fails(self):
        rep = validate_params(DynamicsParams(3, 0.5, 0), "strict")
        assert not rep.passed
        assert "alpha > 3" in rep.violations
        assert any("open interval" in v for v in rep.violations)

    def test_scaled_strict_power(self):
        p = DynamicsParams(5, 0.3, 1, ScalingFunction.power(1.0))
        assert validate_params(p, "scaled-strict", 1.0).passed

    def test_scaled_bound(self):
        # 1/0.3 - 2 = 1.333...
        assert not validate_params(DynamicsParams(5, 0.3, 1, ScalingFunction.power(1.4)), "scaled-basic").passed
        assert not validate_params(DynamicsParams(5, 0.5, 1, ScalingFunction.power(0.0)), "scaled-strict").passed
        assert validate_params(DynamicsParams(5, 0.5, 1, ScalingFunction.power(0.0)), "scaled-basic").passed

    def test_scaled_exponential_fails(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = DynamicsParams(5, 0.3, 1, ScalingFunction.exponential(0.01))
        rep = validate_params(p, "scaled-basic")
        assert not rep.passed and any("sup" in v for v in rep.violations)

    def test_delta_vanishing(self):
        rep = validate_params(DynamicsParams(5, 0.3, 1, ScalingFunction.power(-3.0)), "scaled-basic")
        assert "t^2 delta(t) -> inf" in rep.violations

    def test_unscaled_modes_need_unit(self):
        p = DynamicsParams(5, 0.3, 1, ScalingFunction.power(1.0))
        assert "scaling = unit" in validate_params(p, "basic").violations

    def test_bad_mode(self):
        with pytest.raises(ContractError):
            validate_params(DynamicsParams(3, 0.5), "loose")

    def test_bad_t0(self):
        with pytest.raises(ContractError):
            validate_params(DynamicsParams(3, 0.5), "basic", 0.0)

    @given(alpha=st.floats(3, 50), u=st.floats(0, 1))
    def test_basic_region_passes(self, alpha, u):
        lo = 1 / (alpha - 1)
        theta = lo + u * (0.5 - lo)
        params = DynamicsParams(alpha, theta, 1.0)
        assert validate_params(params, "basic").passed
        assert params.xi >= -1e-12

    @given(alpha=st.floats(1.5, 2.99))
    def test_small_alpha_fails(self, alpha):
        assert not validate_params(DynamicsParams(alpha, 0.5), "basic").passed

    def test_negative_beta_rejected(self):
        with pytest.raises(ContractError):
            DynamicsParams(3, 0.5, -1)


class TestInitialStates:
    def test_quadratic_easy_equilibrium(self):
        prob = catalog("quadratic-easy")
        s = equilibrium_state(prob, solve_kkt_oracle(prob), 1.0)
        acc = rhs(s, DynamicsParams(3, 0.5, 1), prob)[prob.n + prob.m :]
        assert np.linalg.norm(acc) <= 1e-10

    def test_quartic_equilibrium_exact_zero(self):
        prob = catalog("quartic")
        s = equilibrium_state(prob, PrimalDualPoint(np.zeros(4), np.zeros(2)), 1.0)
        np.testing.assert_array_equal(rhs(s, DynamicsParams(3, 0.5, 1), prob), 0.0)

    def test_rank_deficient_both_duals(self):
        prob = catalog("rank-deficient")
        z = solve_kkt_oracle(prob)
        null = np.linalg.svd(prob.A.T)[2][-1]
        for lam in (z.lam, z.lam + 2.0 * null):
            s = equilibrium_state(prob, PrimalDualPoint(z.x, lam), 1.0)
            acc = rhs(s, DynamicsParams(3, 0.5, 1), prob)[prob.n + prob.m :]
            assert np.linalg.norm(acc) <= 1e-10

    def test_residual_too_large(self):
        prob = catalog("quadratic-easy")
        with pytest.raises(ContractError, match="KKT residual"):
            equilibrium_state(prob, PrimalDualPoint(np.zeros(4), np.zeros(2)), 1.0)

    def test_default_initial_state(self):
        prob = catalog("quadratic-easy")
        z = solve_kkt_oracle(prob)
        s = default_initial_state(prob, z)
        assert s.t == 1.0
        np.testing.assert_allclose(s.x, z.x + 1)
        assert not s.lam.any() and not s.x_dot.any() and not s.lam_dot.any()


def test_state_vector_roundtrip():
    s = SystemState(2.0, [1.0, 2.0], [3.0], [4.0, 5.0], [6.0])
    v = s.to_vector()
    np.testing.assert_array_equal(v, [1, 2, 3, 4, 5, 6])
    back = SystemState.from_vector(2.0, v, 2)
    np.testing.assert_array_equal(back.lam_dot, [6.0])


def test_state_rejects_nonfinite():
    with pytest.raises(ContractError):
        SystemState(1.0, [np.inf], [0.0], [0.0], [0.0])
