"""A sequences, normal-ordered exponentials, K and D series and coproducts."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from starexp.fps import GaussRational, TruncatedSeries, exp, pow_rational
from starexp.kcalc import (
    a_sequence,
    compose_d,
    coproduct_momenta,
    d_series,
    k_from_fock,
    k_series_formal_solution,
    k_series_lambda_one,
    k_series_realization,
    normal_ordered_exp,
    pde_residuals,
    star_exponentials,
    verify_integral_recursion,
)
from starexp.numeric import fl_D_term_report, fl_P_jet
from starexp.realization import builtin_realization
from starexp.weyl import fock_apply_exp, weyl_exp_bruteforce, WeylElement

T = TruncatedSeries


def dvar(order, n=1, j=0):
    return T.variable(n, order, j)


# -- A sequence --------------------------------------------------------------------------


def test_a_table_for_d_squared():
    d = dvar(10)
    a = a_sequence([d * d], 3)
    assert a.get((1,), 1) == d**2
    assert a.get((1,), 2).agrees_with((d**3).scale(2))
    assert a.get((1,), 3).agrees_with((d**4).scale(6))


def test_a_initial_conditions():
    d = dvar(12)
    F = d * d + d**3
    a = a_sequence([F], 5)
    assert a.get((0,), 0) == T.one(1, 12)
    for l in range(1, 6):
        assert a.get((0,), l).is_zero()
        assert a.get((l,), l).agrees_with(F**l)
    assert a.get((3,), 2).is_zero()


def test_recursion_instance():
    d = dvar(12)
    a = a_sequence([d * d], 4)
    lhs = a.get((2,), 4).scale(2)
    rhs = sum(
        (a.get((1,), r) * a.get((1,), 4 - r)).scale(math.comb(4, r)) for r in range(1, 4)
    )
    assert lhs.agrees_with(rhs)
    assert verify_integral_recursion(a).passed


def test_recursion_diagonal():
    d = dvar(12)
    a = a_sequence([d + d * d], 4)
    for s in range(2, 5):
        assert a.get((s,), s).scale(s).agrees_with((a.get((s - 1,), s - 1) * a.get((1,), 1)).scale(s))


def test_recursion_two_variables():
    x, y = T.variable(2, 10, 0), T.variable(2, 10, 1)
    a = a_sequence([x * y - y, x * x + y], 5)
    rep = verify_integral_recursion(a, max_parts=3)
    assert rep.passed and rep.checked > 50


@st.composite
def polynomial_F(draw, n):
    out = []
    for _ in range(n):
        terms = {}
        for _ in range(draw(st.integers(1, 3))):
            e = tuple(draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
            if sum(e) <= 3:
                terms[e] = GaussRational(draw(st.integers(-2, 2)))
        out.append(terms)
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 2).flatmap(lambda n: polynomial_F(n)))
def test_recursion_random(terms):
    n = len(terms)
    F = [T(n, 24, t) for t in terms]
    assert verify_integral_recursion(a_sequence(F, 6)).passed


# -- normal-ordered exponential ----------------------------------------------------------


def test_alpha_for_euler_operator():
    M = 6
    w = normal_ordered_exp([dvar(M)], M)
    d = T.variable(2, M, 0)
    lam = T.variable(2, M, 1)
    assert w.coeff((1,)) == d * (exp(lam) - 1)


def test_alpha_for_d_squared_at_lambda_one():
    a = a_sequence([dvar(6) ** 2], 5)
    alpha = T.zero(1, 5)
    for l in range(1, 6):
        alpha = alpha + a.get((1,), l).scale(GaussRational(1) / math.factorial(l))
    k = dvar(5)
    assert alpha.truncate(5) == k**2 + k**3 + k**4 + k**5


def test_matches_bruteforce_x_d_squared():
    M = 6
    d = dvar(M)
    w = normal_ordered_exp([d * d], M)
    a = WeylElement(1, {(1,): d * d}, 1, M)
    assert w.agrees_with(weyl_exp_bruteforce(a, M))


# -- K series, generic mode --------------------------------------------------------------


def test_formal_solution_euler():
    K = k_series_formal_solution([dvar(8)], 8)
    q, lam = T.variable(2, 8, 0), T.variable(2, 8, 1)
    assert K.components[0] == q * exp(lam)
    assert K.boundary()[0] == q


def test_lambda_one_l2():
    K = k_series_lambda_one([dvar(8) ** 2], 8)[0]
    q = dvar(8)
    assert K == q * (1 - q).inverse()


def test_lambda_one_l3():
    K = k_series_lambda_one([dvar(5) ** 3], 5)[0]
    q = dvar(5)
    assert K.terms() == [((1,), 1), ((3,), 1), ((5,), Fraction(3, 2))]
    assert K == q * pow_rational(1 - (q * q).scale(2), Fraction(-1, 2))


def test_lambda_one_needs_valuation_two():
    with pytest.raises(Exception):
        k_series_lambda_one([dvar(5)], 5)


def test_fock_route_and_pde():
    x, y = T.variable(2, 8, 0), T.variable(2, 8, 1)
    F = [x * y + 1, y * y - x]
    K = k_series_formal_solution(F, 8)
    via_fock = k_from_fock(fock_apply_exp(normal_ordered_exp(F, 8)))
    assert all(a.agrees_with(b) for a, b in zip(K.components, via_fock))
    for r in pde_residuals(F, K):
        assert r.truncate(7).is_zero()


# -- realization mode --------------------------------------------------------------------


def test_abelian_k():
    K = k_series_realization(builtin_realization("abelian", order=5), 5)
    for a in range(3):
        assert K.components[a] == T.variable(6, 5, a) + T.variable(6, 5, 3 + a)


def test_su2_sym_k0_identity():
    K = k_series_realization(builtin_realization("su2_sym", order=8, kappa=Fraction(1, 2)), 8)
    assert list(K.k0()) == [T.variable(3, 8, a) for a in range(3)]


def test_su2_fl_k_matches_closed_form_jet():
    kappa = Fraction(1, 2)
    K = k_series_realization(builtin_realization("su2_fl", order=6, kappa=kappa), 6)
    assert list(K.components) == fl_P_jet(kappa, 6)


def test_k_boundary_and_linear_part():
    K = k_series_realization(builtin_realization("su2_fl", order=5), 5)
    assert list(K.boundary()) == [T.variable(6, 5, 3 + a) for a in range(3)]
    for a, c in enumerate(K.k0()):
        assert c.homogeneous_part(1) == T.variable(3, 5, a)


# -- D series ----------------------------------------------------------------------------


def test_abelian_d():
    D = d_series(builtin_realization("abelian", order=4), 4)
    assert [c for c in D.components] == [T.variable(6, 4, a) + T.variable(6, 4, 3 + a) for a in range(3)]
    assert star_exponentials(builtin_realization("abelian", order=4), 4).components == D.components


def test_su2_sym_bch_coefficient():
    kappa = Fraction(1, 2)
    D = d_series(builtin_realization("su2_sym", order=2, kappa=kappa), 2)
    k = [T.variable(6, 2, a) for a in range(3)]
    q = [T.variable(6, 2, 3 + a) for a in range(3)]
    cross = [k[1] * q[2] - k[2] * q[1], k[2] * q[0] - k[0] * q[2], k[0] * q[1] - k[1] * q[0]]
    for a in range(3):
        assert D.components[a] == k[a] + q[a] - cross[a].scale(kappa / 2)


def test_su2_fl_d_term_by_term():
    D = d_series(builtin_realization("su2_fl", order=3), 3)
    report = fl_D_term_report(D.components, 1)
    assert report["symmetric_variant"]["match"]
    assert not report["paper"]["match"]
    assert report["paper"]["terms"]["sqrt-factor * q"]
    assert not report["paper"]["terms"]["cross term k x q"]


@pytest.mark.parametrize("name", ["su2_fl", "su2_sym"])
def test_unit_laws_and_reality(name):
    D = d_series(builtin_realization(name, order=6, kappa=Fraction(1, 3)), 6)
    for a, c in enumerate(D.components):
        assert c.subs_zero([3, 4, 5]) == T.variable(6, 6, a)
        assert c.subs_zero([0, 1, 2]) == T.variable(6, 6, 3 + a)
        assert c.is_real()


def _tripled(D, n, order):
    v = [T.variable(3 * n, order, i) for i in range(3 * n)]
    k, q, r = v[:n], v[n : 2 * n], v[2 * n :]
    left = compose_d(D, compose_d(D, k, q), r)
    right = compose_d(D, k, compose_d(D, q, r))
    return left, right


@pytest.mark.parametrize("name", ["su2_fl", "su2_sym"])
def test_associativity_low_order(name):
    D = d_series(builtin_realization(name, order=3), 3).components
    left, right = _tripled(D, 3, 3)
    assert all(a.agrees_with(b, 3) for a, b in zip(left, right))


# -- coproduct ---------------------------------------------------------------------------


def test_abelian_coproduct_primitive():
    r = builtin_realization("abelian", order=4)
    assert all(coproduct_momenta(r, j, 4).is_primitive() for j in range(3))


@pytest.mark.parametrize("name", ["su2_fl", "su2_sym"])
def test_coproduct_kappa_zero(name):
    r = builtin_realization(name, order=4, kappa=0)
    assert all(coproduct_momenta(r, j, 4).is_primitive() for j in range(3))


def test_su2_sym_coproduct_correction():
    kappa = Fraction(1, 2)
    cp = coproduct_momenta(builtin_realization("su2_sym", order=2, kappa=kappa), 0, 2)
    correction = cp.series - cp.primitive()
    # i * D_1(-i u, -i v): the k x q term turns into -(-i)^2 i = i times it
    u2, u3 = T.variable(6, 2, 1), T.variable(6, 2, 2)
    v2, v3 = T.variable(6, 2, 4), T.variable(6, 2, 5)
    assert correction == (u2 * v3 - u3 * v2).scale(GaussRational(0, kappa / 2))
    assert not cp.is_primitive()


def test_coproduct_index_range():
    with pytest.raises(IndexError):
        coproduct_momenta(builtin_realization("abelian", order=3), 3, 3)
