"""
============
Time scaling
============

Multiplying the forcing terms by a growing factor ``delta(t) = t**r`` speeds
up the decay of the feasibility residual. Admissible exponents satisfy
``r <= 1/theta - 2``.

"""

# %%
# Admissible exponents
# --------------------

import accelpd as apd

theta = 0.3
print(f"largest admissible r for theta={theta}: {1 / theta - 2:.4f}")
for r in (0.0, 1.0, 1.3, 1.4):
    p = apd.DynamicsParams(5.0, theta, 1.0, apd.ScalingFunction.power(r))
    rep = apd.validate_params(p, "scaled-basic")
    print(f"r={r}: {'ok' if rep.passed else rep.violations}")

# %%
# Rates for increasing r
# ----------------------
#
# ``quadratic-flat`` has a weakly coupled constraint, so the unscaled system
# is slow to restore feasibility. Larger ``r`` makes the system stiffer
# and the integrator takes many more steps.

prob = apd.catalog("quadratic-flat")
for r in (0.0, 1.0, 1.3):
    params = apd.DynamicsParams(5.0, theta, 1.0, apd.ScalingFunction.power(r))
    sim = apd.simulate(prob, params, t_end=1000.0)
    est = apd.estimate_rate(sim.rows, "feas", 5.0, 500.0)
    print(f"r={r}: feas slope {est.slope:+.2f}, {sim.log.step_stats['accepted']} steps, {sim.seconds:.1f} s")

# %%
# Exponential scaling
# -------------------
#
# ``delta(t) = exp(c t)`` fails the growth-ratio bound for every ``c > 0``,
# so it can only be run with an explicit override and a short horizon.

import warnings

with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    expo = apd.ScalingFunction.exponential(0.05)
print(caught[0].message)
rep = apd.validate_params(apd.DynamicsParams(5.0, theta, 1.0, expo), "scaled-basic")
print(rep.violations)
