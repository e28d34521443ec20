"""Composing su(2) plane waves in two orderings.

The star product of two exponentials ``e^{ik.x} * e^{iq.x}`` is again an
exponential with momentum ``D(k, q)``.  We build ``D`` as an exact series
for the two built-in su(2) realizations and compare it with the candidate
closed forms coefficient by coefficient, then numerically.
"""

import numpy as np

from starexp.kcalc import d_series
from starexp.numeric import (
    CompiledSeries,
    fl_D_paper,
    fl_D_symmetric_variant,
    fl_D_term_report,
    sym_D,
)
from starexp.realization import builtin_realization

ORDER = 6
KAPPA = 1

r = builtin_realization("su2_fl", order=ORDER, kappa=KAPPA)
D = d_series(r, ORDER)
print("su2_fl, first component of D to order 3:")
print("  ", D.components[0].truncate(3))

report = fl_D_term_report(D.components, KAPPA, ORDER)
for variant, info in report.items():
    print(f"{variant}: {'matches' if info['match'] else 'does not match'}")
    for label, ok in info["terms"].items():
        print(f"    {label:20s} {'ok' if ok else 'differs'}")

# numeric comparison on a few small momenta
rng = np.random.default_rng(0)
pts = rng.uniform(-0.1, 0.1, (4, 6))
series = CompiledSeries(list(D.components))(pts).real
k, q = pts[:, :3], pts[:, 3:]
for name, fn in (("fl_D_paper", fl_D_paper), ("fl_D_symmetric_variant", fl_D_symmetric_variant)):
    print(f"max |series - {name}| = {np.max(np.abs(series - fn(k, q, KAPPA))):.2e}")

# the symmetric ordering composes like SU(2) group elements
r = builtin_realization("su2_sym", order=8, kappa=KAPPA)
series = CompiledSeries(list(d_series(r, 8).components))(pts).real
print(f"su2_sym: max |series - sym_D| = {np.max(np.abs(series - sym_D(k, q, KAPPA))):.2e}")
