"""
==========
Quickstart
==========

Integrate the primal-dual system on a small equality-constrained quadratic,
fit empirical decay rates and write a log-log plot of the residuals.

"""

# %%
# A problem from the catalog
# --------------------------
#
# ``catalog`` returns ready-made test problems. ``quadratic-easy`` minimises
# ``0.5 |x|^2 + c'x`` over four variables subject to two linear equations.

from pathlib import Path

import numpy as np

import accelpd as apd
from accelpd.svg import loglog_svg

prob = apd.catalog("quadratic-easy")
z_star = apd.solve_kkt_oracle(prob)
print("x* =", z_star.x)
print("lambda* =", z_star.lam)
print("KKT residuals:", apd.kkt_residual(prob, z_star))

# %%
# Choosing parameters
# -------------------
#
# ``validate_params`` checks a parameter set against the admissible region.
# The boundary point ``alpha=3, theta=0.5`` is admitted in ``basic`` mode and
# rejected in ``strict`` mode.

params = apd.DynamicsParams(alpha=3.0, theta=0.5, beta=1.0)
for mode in ("basic", "strict"):
    rep = apd.validate_params(params, mode)
    print(f"{mode:>6}: passed={rep.passed} {rep.violations}")

# %%
# Integrating
# -----------
#
# ``simulate`` solves the KKT oracle, starts from ``x* + 1`` with zero dual
# variables and velocities, integrates on a log-spaced grid and evaluates the
# diagnostics at each sample.

sim = apd.simulate(prob, params, t_end=2000.0, rel_tol=1e-8, abs_tol=1e-10)
print(sim.log.termination, sim.log.step_stats, f"{sim.seconds:.2f} s")

last = sim.rows[-1]
print(f"t={last.t:g}  f_gap={last.f_gap:.3e}  feas={last.feas:.3e}  vel={last.vel:.3e}")

# %%
# Empirical rates
# ---------------
#
# Slopes of ``log |q|`` against ``log t`` over the tail of the run. With
# ``alpha=3`` the objective gap and the feasibility residual decay roughly
# like ``t**-2``.

for q in ("feas", "f_gap", "bregman"):
    est = apd.estimate_rate(sim.rows, q, 20.0, 1000.0)
    print(f"{q:>8}: slope {est.slope:+.3f} +- {est.slope_ci:.3f} ({est.n_points} points)")

# %%
# The energy is nonincreasing along the trajectory, up to integration error.

e = apd.column(sim.rows, "energy")
print("largest energy increase between samples:", np.diff(e).max())

# %%
# Plot
# ----
#
# ``loglog_svg`` renders a dependency-free SVG with ``t**-1`` and ``t**-2``
# guide lines.

t = apd.column(sim.rows, "t")
svg = loglog_svg(
    {q: (t, np.abs(apd.column(sim.rows, q))) for q in ("f_gap", "feas", "vel", "bregman")},
    "quadratic-easy, alpha=3, theta=0.5",
)
out = Path("quickstart_rates.svg")
out.write_text(svg)
print("wrote", out)

# %%
# A user-supplied objective
# -------------------------
#
# Any convex ``C^1`` function can be used by passing its value and gradient.
# Here ``f(x) = log(sum(exp(x)))`` with the constraint ``x_1 + x_2 + x_3 = 0``.


def lse(x):
    m = x.max()
    return m + np.log(np.exp(x - m).sum())


def lse_grad(x):
    w = np.exp(x - x.max())
    return w / w.sum()


obj = apd.ObjectiveFunction(3, lse, lse_grad, label="log-sum-exp")
custom = apd.Problem(obj, apd.LinearConstraint([[1.0, 1.0, 1.0]], [0.0]))
sim = apd.simulate(custom, apd.DynamicsParams(5.0, 0.3, 1.0), t_end=500.0)
print(custom.objective.label, sim.log.termination, "x(T) =", sim.log.x[-1])
