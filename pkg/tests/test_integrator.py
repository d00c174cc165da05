import numpy as np
import pytest

from accelpd.dynamics import DynamicsParams, SystemState, default_initial_state, equilibrium_state
from accelpd.integrator import IntegratorConfig, integrate, make_log_schedule
from accelpd.problem import (
    ContractError,
    LinearConstraint,
    ObjectiveFunction,
    Problem,
    catalog,
    polyexp_objective,
    solve_kkt_oracle,
)

CRITICAL = DynamicsParams(3.0, 0.5, 0.0)


def free_problem(n=1):
    return Problem(polyexp_objective(n), LinearConstraint(np.zeros((1, n)), np.zeros(1)))


def damped_start():
    return SystemState(1.0, [1.0], [0.0], [1.0], [0.0])


class TestSchedule:
    def test_decades(self):
        np.testing.assert_allclose(make_log_schedule(1, 100, 3), [1, 10, 100], rtol=1e-15)

    def test_doubling(self):
        np.testing.assert_allclose(make_log_schedule(2, 32, 5), [2, 4, 8, 16, 32], rtol=1e-15)

    def test_endpoints_exact(self):
        ts = make_log_schedule(1.0, 1e4, 401)
        assert ts[0] == 1.0 and ts[-1] == 1e4 and np.all(np.diff(ts) > 0)

    @pytest.mark.parametrize("args", [(1, 1, 2), (0, 10, 3), (5, 1, 3), (1, 10, 1)])
    def test_invalid(self, args):
        with pytest.raises(ContractError):
            make_log_schedule(*args)


class TestIntegrate:
    def test_constant_solution(self):
        prob = free_problem(2)
        init = SystemState(1.0, [0.3, -2.0], [0.5], [0.0, 0.0], [0.0])
        log = integrate(prob, CRITICAL, init, 50.0, IntegratorConfig(samples=20))
        assert log.termination.completed
        for row in log.states:
            np.testing.assert_array_equal(row, init.to_vector())

    @pytest.mark.parametrize("compiled", [True, False])
    def test_damped_equation(self, compiled):
        log = integrate(free_problem(), CRITICAL, damped_start(), 2.0,
                        IntegratorConfig(sample_schedule=[1.0, 1.5, 2.0]), compiled=compiled)
        assert abs(log.states[-1, 0] - 1.375) <= 1e-6
        # dense output at an interior point
        assert abs(log.states[1, 0] - (1 + (1 - 1.5**-2) / 2)) <= 1e-6

    def test_equilibrium_preserved(self):
        prob = catalog("quadratic-easy")
        z = solve_kkt_oracle(prob)
        log = integrate(prob, CRITICAL, equilibrium_state(prob, z, 1.0), 1000.0)
        assert np.max(np.linalg.norm(log.z - z.z, axis=1)) <= 1e-6

    def test_schedule_fidelity(self):
        prob = catalog("quartic")
        z = solve_kkt_oracle(prob)
        ts = np.array([1.0, 1.1, np.pi, 7.77, 20.0, 33.3])
        log = integrate(prob, CRITICAL, default_initial_state(prob, z), 40.0, IntegratorConfig(sample_schedule=ts))
        np.testing.assert_array_equal(log.times, ts)

    def test_deterministic(self):
        prob = catalog("expsum")
        z = solve_kkt_oracle(prob)
        init = default_initial_state(prob, z)
        cfg = IntegratorConfig(samples=50)
        a = integrate(prob, DynamicsParams(5, 0.3, 1), init, 100.0, cfg)
        b = integrate(prob, DynamicsParams(5, 0.3, 1), init, 100.0, cfg)
        assert a.states.tobytes() == b.states.tobytes()
        assert a.step_stats == b.step_stats

    def test_python_path_matches_compiled(self):
        prob = catalog("quartic")
        z = solve_kkt_oracle(prob)
        init = default_initial_state(prob, z)
        cfg = IntegratorConfig(samples=10)
        a = integrate(prob, DynamicsParams(5, 0.3, 1), init, 5.0, cfg, compiled=True)
        b = integrate(prob, DynamicsParams(5, 0.3, 1), init, 5.0, cfg, compiled=False)
        assert a.step_stats == b.step_stats
        np.testing.assert_allclose(a.states, b.states, rtol=1e-12, atol=1e-14)

    def test_user_objective(self):
        # same quadratic, supplied as plain callables
        ref = catalog("quadratic-easy")
        Q = ref.objective.coefficients.quad
        c = ref.objective.coefficients.lin
        obj = ObjectiveFunction(4, lambda x: 0.5 * x @ Q @ x + c @ x, lambda x: Q @ x + c)
        prob = Problem(obj, ref.constraint)
        z = solve_kkt_oracle(ref)
        init = default_initial_state(ref, z)
        cfg = IntegratorConfig(samples=10)
        a = integrate(ref, DynamicsParams(3, 0.5, 1), init, 5.0, cfg)
        b = integrate(prob, DynamicsParams(3, 0.5, 1), init, 5.0, cfg)
        np.testing.assert_allclose(a.states, b.states, rtol=1e-10, atol=1e-12)

    def test_blowup(self):
        # concave objective: solutions grow exponentially
        obj = ObjectiveFunction(1, lambda x: -5.0 * float(x @ x), lambda x: -10.0 * x)
        prob = Problem(obj, LinearConstraint([[0.0]], [0.0]))
        init = SystemState(1.0, [1.0], [0.0], [0.0], [0.0])
        log = integrate(prob, CRITICAL, init, 100.0, IntegratorConfig(samples=200))
        assert log.termination.kind == "blowup"
        assert 1.0 < log.termination.t < 100.0
        assert len(log) < 200 and np.isfinite(log.states).all()

    def test_nonfinite_gradient_is_blowup(self):
        obj = ObjectiveFunction(
            1, lambda x: 0.0, lambda x: np.array([np.nan]) if x[0] > 1.5 else np.array([-1.0])
        )
        prob = Problem(obj, LinearConstraint([[0.0]], [0.0]))
        init = SystemState(1.0, [1.0], [0.0], [0.0], [0.0])
        log = integrate(prob, CRITICAL, init, 10.0, IntegratorConfig(samples=50))
        assert log.termination.kind == "blowup"

    def test_step_limit(self):
        prob = catalog("quadratic-easy")
        z = solve_kkt_oracle(prob)
        log = integrate(prob, CRITICAL, default_initial_state(prob, z), 1000.0, IntegratorConfig(max_steps=50))
        assert log.termination.kind == "step-limit"
        assert str(log.termination).startswith("step-limit(")
        assert 0 < len(log) < 400

    def test_unvalidated_required(self):
        prob = catalog("quadratic-easy")
        z = solve_kkt_oracle(prob)
        bad = DynamicsParams(2.0, 0.5, 0.0)
        with pytest.raises(ContractError, match="unvalidated"):
            integrate(prob, bad, default_initial_state(prob, z), 10.0)
        log = integrate(prob, bad, default_initial_state(prob, z), 10.0, unvalidated=True)
        assert log.termination.completed

    def test_samples_accessor(self):
        prob = catalog("quartic")
        z = solve_kkt_oracle(prob)
        log = integrate(prob, CRITICAL, default_initial_state(prob, z), 10.0, IntegratorConfig(samples=5))
        s = log.samples
        assert len(s) == 5 and s[-1].t == 10.0
        np.testing.assert_array_equal(s[2].x, log.x[2])


class TestConfig:
    @pytest.mark.parametrize("kw", [{"rel_tol": 0.1}, {"rel_tol": 0}, {"abs_tol": 0}, {"max_steps": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            IntegratorConfig(**kw)

    def test_schedule_must_start_at_t0(self):
        with pytest.raises(ContractError):
            IntegratorConfig(sample_schedule=[2.0, 3.0]).schedule(1.0, 5.0)
        with pytest.raises(ContractError):
            IntegratorConfig(sample_schedule=[1.0, 6.0]).schedule(1.0, 5.0)
        with pytest.raises(ContractError):
            IntegratorConfig(sample_schedule=[1.0, 3.0, 2.0]).schedule(1.0, 5.0)
