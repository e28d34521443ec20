"""One-variable flows ``x d^l``: the exponential as a change of variables.

For ``F(d) = d^l`` the normal-ordered exponential ``exp(x F(d))`` acts on
plane waves by substituting a new momentum ``K(q)``.  We compute ``K``
two ways, look at the full flow in ``lam``, and compare with the closed form
``q / (1 - (l-1) q^(l-1))^(1/(l-1))``.

Run with ``python3 demos/01_one_variable_flows.py``.
"""

from starexp.cli import dl_closed_form_jet
from starexp.fps import TruncatedSeries
from starexp.kcalc import (
    k_from_fock,
    k_series_formal_solution,
    k_series_lambda_one,
    normal_ordered_exp,
)
from starexp.weyl import fock_apply_exp

ORDER = 9

for l in (2, 3, 4):
    q = TruncatedSeries.variable(1, ORDER, 0)
    F = [q**l]

    # direct resummation of the A-sequence
    direct = k_series_lambda_one(F, ORDER)[0]

    # the formal solution of the flow equation keeps lambda as a variable
    formal = k_series_formal_solution(F, ORDER)

    # acting with the operator on the vacuum
    fock = k_from_fock(fock_apply_exp(normal_ordered_exp(F, ORDER)))[0]

    closed = dl_closed_form_jet(l, ORDER)
    print(f"l = {l}")
    print(f"  K(q)   = {direct}")
    print(f"  closed form agrees: {direct == closed}")
    print(f"  K(q, lam) = {formal.components[0].truncate(7).format(formal.variables)}")
    print(f"  K(q, 0) = q: {formal.boundary()[0] == TruncatedSeries.variable(2, ORDER, 0)}")
    print(f"  Fock route equals the formal solution: {fock.agrees_with(formal.components[0], ORDER)}")
