"""
=====================================
The boundary case alpha=3, theta=1/2
=====================================

At the edge of the admissible region the rates are only ``O(t**-2)``, yet
the trajectory itself still settles at a primal-dual solution. This demo
compares the boundary case with an interior parameter set.

"""

# %%
# Two runs on the same problem
# ----------------------------

import numpy as np

import accelpd as apd

prob = apd.catalog("quadratic-easy")
T = 1e4
tols = dict(rel_tol=1e-7, abs_tol=1e-10)

boundary = apd.simulate(prob, apd.DynamicsParams(3.0, 0.5, 1.0), T, **tols)
interior = apd.simulate(prob, apd.DynamicsParams(5.0, 0.3, 1.0), T, rel_tol=1e-8, abs_tol=1e-12)
for name, sim in (("boundary", boundary), ("interior", interior)):
    print(f"{name}: {sim.log.termination}, {sim.log.step_stats['accepted']} steps, {sim.seconds:.1f} s")

# %%
# Does the trajectory converge?
# -----------------------------
#
# ``trajectory_convergence_check`` looks at the KKT residuals at ``T`` and at
# the displacements ``|z(T) - z(T/2)|`` and ``|z(T/2) - z(T/4)|``.

rep = apd.trajectory_convergence_check(boundary.log, prob, tol_kkt=1e-3, tol_cauchy=1e-2)
print(rep.reason, f"feas={rep.feas:.2e} stat={rep.stat:.2e}")
print("distance of the limit from the oracle point:", np.linalg.norm(rep.limit.z - boundary.z_star.z))

# %%
# Big-O against little-o
# ----------------------
#
# ``check_o_rate`` takes the supremum of ``t**2 |q(t)|`` over the last four
# dyadic windows. A sequence that stays flat is ``O(t**-2)``. A sequence that
# keeps dropping indicates ``o(t**-2)``.

for name, sim in (("boundary", boundary), ("interior", interior)):
    for q in ("feas", "f_gap"):
        r = apd.check_o_rate(sim.rows, q, power=2.0)
        sups = ", ".join(f"{s:.2e}" for s in r.tail_sups)
        print(f"{name:>8} {q:>5}: sups [{sups}] little-o: {r.o_rate_pass}")

# %%
# Velocity
# --------
#
# ``t * |v(t)|`` stays bounded in the boundary case.

t = apd.column(boundary.rows, "t")
tv = t * apd.column(boundary.rows, "vel")
print(f"max t*vel = {tv.max():.3e}, at T: {tv[-1]:.3e}")

# %%
# Non-unique multipliers
# ----------------------
#
# With a rank-deficient constraint matrix the multiplier is not unique, but
# ``A' lambda`` is. The oracle returns the minimum-norm representative.

rd = apd.catalog("rank-deficient")
z = apd.solve_kkt_oracle(rd)
null = np.linalg.svd(rd.A.T)[2][-1]
other = apd.PrimalDualPoint(z.x, z.lam + 0.5 * null)
print("lambda (min norm):", z.lam, " shifted:", other.lam)
print("KKT residuals of the shifted point:", apd.kkt_residual(rd, other))
