"""Associativity of the star product through low order.

With three momentum vectors ``k, q, p`` we compare ``D(D(k, q), p)`` with
``D(k, D(q, p))`` as exact series.  Any realization that satisfies the
phi system should give an associative product, while a realization with
the wrong sign in its deformation should fail the validation first.
"""

from starexp.fps import TruncatedSeries
from starexp.kcalc import compose_d, coproduct_momenta, d_series
from starexp.realization import builtin_realization, validate_phi_system

ORDER = 4

for name in ("abelian", "su2_fl", "su2_sym"):
    r = builtin_realization(name, order=ORDER)
    D = d_series(r, ORDER).components
    n = r.n
    v = [TruncatedSeries.variable(3 * n, ORDER, i) for i in range(3 * n)]
    k, q, p = v[:n], v[n : 2 * n], v[2 * n :]
    left = compose_d(D, compose_d(D, k, q), p)
    right = compose_d(D, k, compose_d(D, q, p))
    same = all(a == b for a, b in zip(left, right))
    print(f"{name:8s} associative: {same}   phi system valid: {validate_phi_system(r).passed}")

# the coproduct of a momentum is primitive only in the undeformed case
for kappa in (0, 1):
    r = builtin_realization("su2_sym", order=5, kappa=kappa)
    cop = coproduct_momenta(r, 0, 5)
    print(f"kappa = {kappa}: coproduct of p1 primitive: {cop.is_primitive()}")
    if not cop.is_primitive():
        print("    leading correction:", (cop.series - cop.primitive()).truncate(2))
