"""Realization grids, structure constants and the phi-system check."""

from fractions import Fraction

import pytest

from starexp.fps import GaussRational, I, TruncatedSeries
from starexp.realization import (
    Realization,
    RealizationError,
    StructureConstants,
    builtin_realization,
    levi_civita,
    validate_phi_system,
)
from starexp.weyl import check_lie_homomorphism

KAPPAS = [1, Fraction(1, 2)]


def test_levi_civita():
    assert levi_civita(0, 1, 2) == 1
    assert levi_civita(1, 0, 2) == -1
    assert levi_civita(0, 0, 2) == 0


def test_structure_constants_antisymmetric_closure():
    c = StructureConstants.su2(I)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                assert c(i, j, k) == -c(j, i, k)
    assert c(0, 1, 2) == I


def test_abelian_n4():
    r = builtin_realization("abelian", order=4, n=4)
    assert r.constants.is_zero()
    assert all(r.phi[a][j] == TruncatedSeries.constant(4, 4, int(a == j)) for a in range(4) for j in range(4))
    assert validate_phi_system(r).passed


@pytest.mark.parametrize("name", ["abelian", "su2_fl", "su2_sym"])
@pytest.mark.parametrize("kappa", KAPPAS)
def test_builtins_validate(name, kappa):
    r = builtin_realization(name, order=8, kappa=kappa)
    assert validate_phi_system(r).passed
    assert not r.constants.jacobi_violations()
    for a in range(r.n):
        for j in range(r.n):
            assert r.phi[a][j].constant_term() == int(a == j)


def test_su2_fl_entry_1_2():
    # row 1 = coordinate, column 2 = generator: i kappa eps_{2 1 3} d3
    r = builtin_realization("su2_fl", order=3, kappa=Fraction(1, 2))
    assert r.phi[0][1].terms() == [((0, 0, 1), GaussRational(0, Fraction(-1, 2)))]


def test_su2_fl_constants():
    r = builtin_realization("su2_fl", order=3, kappa=1)
    assert r.constants(0, 1, 2) == GaussRational(0, -2)


def test_su2_sym_diagonal_expansion():
    kappa = Fraction(1, 2)
    r = builtin_realization("su2_sym", order=4, kappa=kappa)
    d11 = r.phi[0][0]
    assert d11.constant_term() == 1
    assert d11.homogeneous_part(1).is_zero()
    # the scalar is (t/2)cot(t/2) at t^2 = kappa^2 d.d, so
    # 1 + kappa^2 d.d / 12 away from the d_1^2 direction
    assert d11.coeff((0, 1, 0)) == 0
    assert d11.coeff((0, 2, 0)) == kappa**2 / 12
    assert d11.coeff((0, 0, 2)) == kappa**2 / 12
    # off-diagonal epsilon term at order 1
    assert r.phi[1][0].homogeneous_part(1).terms() == [((0, 0, 1), GaussRational(0, -kappa / 2))]


def test_su2_sym_constants():
    r = builtin_realization("su2_sym", order=3, kappa=Fraction(1, 3))
    assert r.constants(0, 1, 2) == GaussRational(0, Fraction(1, 3))


def _lowest_residual_degree(rep):
    return min(sum(v[3]) for v in rep.violations)


def test_perturbed_phi_fails():
    r = builtin_realization("su2_fl", order=6, kappa=1)
    d = [TruncatedSeries.variable(3, 6, c) for c in range(3)]
    # d1 added to phi_11 only meets the other columns through a commutator,
    # so the residual starts at order 1
    rep = validate_phi_system(r.with_phi(0, 0, r.phi[0][0] + d[0]))
    assert not rep.passed and _lowest_residual_degree(rep) == 1
    # d2 added to phi_11 is differentiated against the identity directly
    rep = validate_phi_system(r.with_phi(0, 0, r.phi[0][0] + d[1]))
    assert not rep.passed and _lowest_residual_degree(rep) == 0


def test_wrong_constants_fail():
    r = builtin_realization("su2_fl", order=5, kappa=1)
    assert not validate_phi_system(r.with_constants(StructureConstants.su2(I))).passed


def test_phi_origin_must_be_identity():
    n, order = 2, 3
    grid = [[TruncatedSeries.constant(n, order, 2 if a == j else 0) for j in range(n)] for a in range(n)]
    with pytest.raises(RealizationError):
        Realization("bad", n, StructureConstants.zero(n), GaussRational(1), grid, order)


def test_unknown_builtin():
    with pytest.raises(RealizationError):
        builtin_realization("so3", order=4)


def test_order_at_least_two():
    with pytest.raises(RealizationError):
        builtin_realization("su2_fl", order=1)


@pytest.mark.parametrize(
    "r",
    [
        builtin_realization("su2_fl", order=6),
        builtin_realization("su2_sym", order=6, kappa=Fraction(1, 2)),
        builtin_realization("su2_fl", order=6).with_phi(0, 1, TruncatedSeries.variable(3, 6, 2).scale(I)),
        builtin_realization("su2_sym", order=6).with_constants(StructureConstants.su2(-I)),
    ],
    ids=["fl", "sym", "fl-flipped-entry", "sym-wrong-sign"],
)
def test_phi_system_equivalent_to_homomorphism(r):
    assert validate_phi_system(r).passed == check_lie_homomorphism(r).passed


def test_digest_stable_and_sensitive():
    a = builtin_realization("su2_fl", order=5)
    b = builtin_realization("su2_fl", order=5)
    c = builtin_realization("su2_fl", order=5, kappa=Fraction(1, 2))
    assert a.digest() == b.digest() != c.digest()
