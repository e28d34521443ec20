"""Normal-ordered Weyl algebra, realized generators and operator exponentials."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from starexp.fps import GaussRational, I, TruncatedSeries
from starexp.realization import builtin_realization
from starexp.weyl import (
    FockPrefactor,
    UnsupportedShapeError,
    WeylElement,
    check_lie_homomorphism,
    commutator,
    fock_apply_exp,
    realize_generators,
    weyl_exp_bruteforce,
)

W = WeylElement


def x(n, i, order=6):
    return W.coordinate(n, i, order)


def d(n, i, order=6):
    return W.derivative(n, i, order)


def flip_epsilon(r):
    """Same grid with the sign of every off-diagonal entry reversed."""
    out = r
    for a in range(r.n):
        for j in range(r.n):
            if a != j:
                out = out.with_phi(a, j, -r.phi[a][j], name=f"{r.name}-flipped")
    return out


def test_d_times_x():
    assert (d(1, 0) * x(1, 0)).agrees_with(x(1, 0) * d(1, 0) + W.scalar(1, 6))


def test_euler_operator_squared():
    e = x(1, 0) * d(1, 0)
    want = x(1, 0) * x(1, 0) * d(1, 0) * d(1, 0) + e
    assert (e * e).agrees_with(want)


def test_commutator_with_coordinate():
    a = x(1, 0) * d(1, 0) * d(1, 0)
    assert commutator(a, x(1, 0)).agrees_with((x(1, 0) * d(1, 0)).scale(2))


@pytest.mark.parametrize("i", range(2))
@pytest.mark.parametrize("j", range(2))
def test_canonical_relations(i, j):
    assert commutator(d(2, i), x(2, j)).agrees_with(W.scalar(2, 6, int(i == j)))


def test_product_consumes_derivative_order():
    a = W.from_series(1, TruncatedSeries.variable(1, 5, 0) ** 2)
    assert (a * x(1, 0, 5)).d_order == 4


def test_abelian_generators_are_coordinates():
    gens = realize_generators(builtin_realization("abelian", order=4), 4)
    assert gens == [x(3, i, 4) for i in range(3)]


def test_su2_fl_generator_three():
    kappa = Fraction(1, 2)
    r = builtin_realization("su2_fl", order=5, kappa=kappa)
    g3 = realize_generators(r, 5)[2]
    root = r.phi[2][2]
    want = (
        W(3, {(0, 0, 1): root}, 3, 5)
        + (x(3, 0, 5) * d(3, 1, 5) - x(3, 1, 5) * d(3, 0, 5)).scale(I * kappa)
    )
    assert g3 == want


def test_su2_sym_generator_low_order():
    # with p = -i d the epsilon part of xhat_1 is (kappa/2)(x2 p3 - x3 p2)
    kappa = Fraction(1, 3)
    r = builtin_realization("su2_sym", order=3, kappa=kappa)
    g1 = realize_generators(r, 3)[0]
    assert g1.coeff((1, 0, 0)).homogeneous_part(1).is_zero()
    assert g1.coeff((0, 1, 0)).homogeneous_part(1).terms() == [((0, 0, 1), GaussRational(0, -kappa / 2))]
    assert g1.coeff((0, 0, 1)).homogeneous_part(1).terms() == [((0, 1, 0), GaussRational(0, kappa / 2))]


@pytest.mark.parametrize("name", ["abelian", "su2_fl", "su2_sym"])
@pytest.mark.parametrize("kappa", [1, Fraction(1, 2)])
def test_homomorphism_passes(name, kappa):
    assert check_lie_homomorphism(builtin_realization(name, order=8, kappa=kappa)).passed


def test_flipped_epsilon_fails_at_order_zero():
    rep = check_lie_homomorphism(flip_epsilon(builtin_realization("su2_fl", order=6)))
    assert not rep.passed
    assert sum(rep.worst[3]) == 0


def test_generators_extend_multiplicatively():
    r = builtin_realization("su2_fl", order=6, kappa=Fraction(1, 2))
    g = realize_generators(r, 6)
    for i, j, k in [(0, 1, 2), (2, 0, 1), (1, 1, 0)]:
        assert ((g[i] * g[j]) * g[k]).agrees_with(g[i] * (g[j] * g[k]))


# -- exponentials ------------------------------------------------------------------------


def test_exp_euler_operator():
    e = weyl_exp_bruteforce(x(1, 0, 3) * d(1, 0, 3), 3)
    lam = TruncatedSeries.variable(2, e.d_order, 1)
    assert e.coeff((0,)) == TruncatedSeries.one(2, e.d_order)
    assert e.coeff((1,)).homogeneous_part(2) == (TruncatedSeries.variable(2, e.d_order, 0) * lam)
    assert e.coeff((2,)).homogeneous_part(4) == (
        TruncatedSeries.variable(2, e.d_order, 0) ** 2 * lam * lam
    ).scale(Fraction(1, 2))


def test_exp_of_coordinate():
    e = weyl_exp_bruteforce(x(1, 0, 5), 5)
    for m in range(6):
        assert e.coeff((m,)).terms() == [((0, m), GaussRational(Fraction(1, math.factorial(m))))]


def test_exp_rejects_quadratic_coordinates():
    with pytest.raises(UnsupportedShapeError):
        weyl_exp_bruteforce(x(1, 0) * x(1, 0), 3)


def test_exp_truncation_consistency():
    a = x(2, 0, 6) * d(2, 1, 6) * d(2, 1, 6) + x(2, 1, 6) * d(2, 0, 6)
    hi = weyl_exp_bruteforce(a, 6)
    lo = weyl_exp_bruteforce(a, 5)
    assert hi.agrees_with(lo)


def test_fock_eigenvalue():
    p = fock_apply_exp(d(1, 0))
    assert p.ring == "formal" and p.coeff((0,)) == TruncatedSeries.variable(1, 6, 0)


def test_fock_euler():
    p = fock_apply_exp(x(1, 0) * d(1, 0))
    assert p.coeff((1,)) == TruncatedSeries.variable(1, 6, 0)


def test_vacuum_projection():
    e = weyl_exp_bruteforce(x(1, 0, 5) * d(1, 0, 5) * d(1, 0, 5), 5)
    vac = fock_apply_exp(e, [0])
    assert list(vac.terms) == [(0,)]
    assert vac.terms[(0,)] == TruncatedSeries.one(1, vac.terms[(0,)].order)


def test_fock_numeric_q_needs_polynomial_flag():
    w = x(1, 0) * d(1, 0) * d(1, 0)
    with pytest.raises(Exception):
        fock_apply_exp(w, [2])
    p = fock_apply_exp(w, [2], polynomial=True)
    assert p.coeff((1,)).constant_term() == 4


# -- properties --------------------------------------------------------------------------


@st.composite
def weyl_elements(draw, n=2, order=4):
    terms = {}
    for _ in range(draw(st.integers(1, 3))):
        alpha = tuple(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
        if sum(alpha) > 2:
            continue
        coeffs = {}
        for _ in range(draw(st.integers(1, 3))):
            e = tuple(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
            if sum(e) <= order:
                coeffs[e] = GaussRational(draw(st.integers(-2, 2)))
        terms[alpha] = TruncatedSeries(n, order, coeffs)
    return W(n, terms, n, order)


@settings(max_examples=40, deadline=None)
@given(weyl_elements(), weyl_elements(), weyl_elements())
def test_product_associative(a, b, c):
    assert ((a * b) * c).agrees_with(a * (b * c))
