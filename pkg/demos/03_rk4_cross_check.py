"""Numerical cross-check of the momentum flow.

``K(k, q)`` solves a first order ODE in the flow parameter.  Integrating it
with fixed-step RK4 should reproduce the closed form for the su2_fl
realization, and halving the step should cut the error by about 2^4.
"""

import numpy as np

from starexp.numeric import (
    OdeProblem,
    cross_check,
    fl_P,
    k_ode_integrate,
    step_halving_ratio,
)
from starexp.realization import builtin_realization

r = builtin_realization("su2_fl", order=8, kappa=1)
rng = np.random.default_rng(1)
k = rng.uniform(-0.05, 0.05, (3, 3))
q = rng.uniform(-0.05, 0.05, (3, 3))

for steps in (4, 8, 16, 32):
    res = k_ode_integrate(OdeProblem.from_realization(r, k, q, steps=steps))
    err = np.max(np.abs(res.value - fl_P(k, q, 1.0)))
    print(f"steps = {steps:3d}  max error = {err:.3e}")

print(f"step-halving ratio: {step_halving_ratio(OdeProblem.from_realization(r, k, q)):.2f}")

# the packaged driver does the same on random samples
samples = [(k[i], q[i]) for i in range(len(k))]
report = cross_check(r, samples, steps=2000)
print(report.table())
