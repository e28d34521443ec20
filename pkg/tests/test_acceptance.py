"""Acceptance suite: ten end-to-end criteria with time budgets.

Each test prints one ``PASS``/``FAIL`` line with its runtime.  Run the
file directly (``python3 tests/test_acceptance.py``) to get just the ten
lines, or through pytest with ``-s`` to see them inline.
"""

from __future__ import annotations

import random
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from starexp.fps import GaussRational, TruncatedSeries, pow_rational
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
    verify_integral_recursion,
)
from starexp.numeric import (
    CompiledSeries,
    OdeProblem,
    fl_D_term_report,
    fl_P,
    k_ode_integrate,
    step_halving_ratio,
    sym_D,
)
from starexp.realization import builtin_realization, validate_phi_system
from starexp.weyl import WeylElement, check_lie_homomorphism, fock_apply_exp, weyl_exp_bruteforce

T = TruncatedSeries
_capsys = None


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


def report(number: int, title: str, passed: bool, elapsed: float, budget: float, detail: str = "") -> None:
    ok = passed and elapsed < budget
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {number:2d}: {title} ({elapsed:.2f} s of {budget:g} s)"
    if detail:
        line += f" -- {detail}"
    if _capsys is not None:
        with _capsys.disabled():
            print(line)
    else:
        print(line)
    assert passed, detail or title
    assert elapsed < budget, f"{elapsed:.2f} s exceeds the {budget} s budget"


def random_polynomial_F(rng: random.Random, n: int, order: int) -> list[TruncatedSeries]:
    """``n`` polynomials of degree <= 3 with coefficients in -2..2."""
    F = []
    for _ in range(n):
        terms = {}
        for _ in range(rng.randint(1, 4)):
            e = tuple(rng.randint(0, 3) for _ in range(n))
            if sum(e) <= 3:
                terms[e] = GaussRational(rng.randint(-2, 2))
        F.append(T(n, order, terms))
    return F


def as_weyl(F: list[TruncatedSeries]) -> WeylElement:
    """``sum_i x_i F_i(d)``."""
    n = len(F)
    terms = {}
    for i, f in enumerate(F):
        alpha = [0] * n
        alpha[i] = 1
        terms[tuple(alpha)] = f
    return WeylElement(n, terms, n, min(f.order for f in F))


def test_criterion_01_dl_closed_form():
    start = time.perf_counter()
    results = []
    for l in (2, 3):
        order = 10
        q = T.variable(1, order, 0)
        K = k_series_lambda_one([q**l], order)[0]
        closed = q * pow_rational(1 - (q ** (l - 1)).scale(l - 1), Fraction(-1, l - 1))
        results.append(K == closed)
    elapsed = time.perf_counter() - start
    report(1, "K for F = d^l matches its closed form, l = 2, 3, order 10", all(results), elapsed, 1.0)


def test_criterion_02_integral_recursion():
    start = time.perf_counter()
    failures = []
    checks = 0
    for seed in range(50):
        rng = random.Random(seed)
        n = rng.choice([1, 2])
        F = random_polynomial_F(rng, n, 32)
        rep = verify_integral_recursion(a_sequence(F, 8, max_s=4), max_parts=3)
        checks += rep.checked
        if not rep.passed:
            failures.append(seed)
    elapsed = time.perf_counter() - start
    report(2, "integral recursion and multinomial form, 50 seeds, |s| <= 4, l <= 8", not failures, elapsed, 10.0,
           f"{checks} identities checked" + (f", failing seeds {failures}" if failures else ""))


def test_criterion_03_normal_ordered_vs_bruteforce():
    start = time.perf_counter()
    failures = []
    M = 6
    for seed in range(20):
        rng = random.Random(1000 + seed)
        n = rng.choice([1, 2])
        F = random_polynomial_F(rng, n, M)
        fast = normal_ordered_exp(F, M)
        slow = weyl_exp_bruteforce(as_weyl(F), M)
        if not (min(fast.d_order, slow.d_order) >= M and fast.agrees_with(slow, M)):
            failures.append(seed)
    elapsed = time.perf_counter() - start
    report(3, "normal-ordered exponential equals brute force, 20 F, joint order 6", not failures, elapsed, 30.0,
           f"failing seeds {failures}" if failures else "")


def test_criterion_04_formal_solution_consistency():
    start = time.perf_counter()
    ok = True
    cases = 0
    for seed in range(6):
        rng = random.Random(2000 + seed)
        n = rng.choice([1, 2])
        F = random_polynomial_F(rng, n, 8)
        K = k_series_formal_solution(F, 8)
        fock = k_from_fock(fock_apply_exp(normal_ordered_exp(F, 8)))
        ok &= all(a.agrees_with(b, 8) for a, b in zip(K.components, fock))
        ok &= all(r.truncate(7).is_zero() for r in pde_residuals(F, K))
        cases += 1
    d = T.variable(1, 8, 0)
    for F in ([d * d], [d**3 + d]):
        K = k_series_formal_solution(F, 8)
        fock = k_from_fock(fock_apply_exp(normal_ordered_exp(F, 8)))
        ok &= K.components[0].agrees_with(fock[0], 8)
        ok &= all(r.truncate(7).is_zero() for r in pde_residuals(F, K))
        cases += 1
    elapsed = time.perf_counter() - start
    report(4, "formal solution equals Fock route at order 8, PDE through order 7", ok, elapsed, 30.0, f"{cases} flows")


def _flip_epsilon(r):
    out = r
    for a in range(r.n):
        for j in range(r.n):
            if a != j:
                out = out.with_phi(a, j, -r.phi[a][j], name=f"{r.name}-flipped")
    return out


def test_criterion_05_phi_system():
    start = time.perf_counter()
    ok = True
    for name in ("su2_fl", "su2_sym"):
        for kappa in (1, Fraction(1, 2)):
            r = builtin_realization(name, order=8, kappa=kappa)
            ok &= validate_phi_system(r).passed and check_lie_homomorphism(r).passed
    bad = _flip_epsilon(builtin_realization("su2_fl", order=8))
    rejected = not validate_phi_system(bad).passed and not check_lie_homomorphism(bad).passed
    elapsed = time.perf_counter() - start
    report(5, "phi system and commutators hold for both su(2) grids, order 8", ok and rejected, elapsed, 10.0,
           "sign-flipped grid rejected by both checks" if rejected else "sign-flipped grid NOT rejected")


def test_criterion_06_rk4_gate():
    start = time.perf_counter()
    r = builtin_realization("su2_fl", order=8, kappa=1)
    rng = np.random.default_rng(6)
    k = rng.uniform(-0.1, 0.1, (5, 3)) / np.sqrt(3)
    q = rng.uniform(-0.1, 0.1, (5, 3)) / np.sqrt(3)
    res = k_ode_integrate(OdeProblem.from_realization(r, k, q, steps=10_000))
    dev = float(np.max(np.abs(res.value - fl_P(k, q, 1.0))))
    ratio = step_halving_ratio(OdeProblem.from_realization(r, k, q), coarse=4)
    elapsed = time.perf_counter() - start
    report(6, "RK4 with 10^4 steps matches the closed form for su2_fl", dev < 1e-8 and ratio >= 12, elapsed, 5.0,
           f"max deviation {dev:.2e}, step-halving ratio {ratio:.2f}")


def test_criterion_07_fl_d_adjudication():
    start = time.perf_counter()
    order = 6
    D = d_series(builtin_realization("su2_fl", order=order, kappa=1), order)
    rep = fl_D_term_report(D.components, 1, order)
    matches = [v for v, info in rep.items() if info["match"]]
    elapsed = time.perf_counter() - start
    detail = "; ".join(
        f"{v}: {'match' if info['match'] else 'no match'} ("
        + ", ".join(f"{t} {'ok' if good else 'differs'}" for t, good in info["terms"].items())
        + ")"
        for v, info in rep.items()
    )
    report(7, f"D jet of su2_fl at order {order} matches exactly one closed form [{', '.join(matches) or 'none'}]",
           len(matches) == 1, elapsed, 60.0, detail)


def test_criterion_08_symmetric_ordering():
    start = time.perf_counter()
    ok = True
    worst = 0.0
    rng = np.random.default_rng(8)
    for kappa in (1, Fraction(1, 2)):
        r = builtin_realization("su2_sym", order=8, kappa=kappa)
        K = k_series_realization(r, 8)
        ok &= list(K.k0()) == [T.variable(3, 8, a) for a in range(3)]
        D = d_series(r, 8)
        pts = rng.uniform(-0.1, 0.1, (5, 6))
        series = CompiledSeries(list(D.components))(pts).real
        closed = sym_D(pts[:, :3], pts[:, 3:], float(kappa))
        worst = max(worst, float(np.max(np.abs(series - closed))))
    elapsed = time.perf_counter() - start
    report(8, "symmetric ordering: K0 is the identity, D matches the group law", ok and worst < 1e-6, elapsed, 60.0,
           f"max deviation {worst:.2e}")


def test_criterion_09_associativity():
    start = time.perf_counter()
    order = 4
    results = {}
    for name in ("abelian", "su2_fl", "su2_sym"):
        r = builtin_realization(name, order=order)
        D = d_series(r, order).components
        n = r.n
        v = [T.variable(3 * n, order, i) for i in range(3 * n)]
        k, q, w = v[:n], v[n : 2 * n], v[2 * n :]
        left = compose_d(D, compose_d(D, k, q), w)
        right = compose_d(D, k, compose_d(D, q, w))
        results[name] = all(a.order >= order and a == b for a, b in zip(left, right))
    elapsed = time.perf_counter() - start
    report(9, "star product associative through order 4", all(results.values()), elapsed, 120.0,
           ", ".join(f"{k} {'ok' if v else 'FAILS'}" for k, v in results.items()))


def test_criterion_10_coproduct():
    start = time.perf_counter()
    ok = all(coproduct_momenta(builtin_realization("abelian", order=5), j, 5).is_primitive() for j in range(3))
    for name in ("su2_fl", "su2_sym"):
        r = builtin_realization(name, order=5, kappa=0)
        ok &= all(coproduct_momenta(r, j, 5).is_primitive() for j in range(3))
    deformed = not coproduct_momenta(builtin_realization("su2_sym", order=5), 0, 5).is_primitive()
    elapsed = time.perf_counter() - start
    report(10, "coproduct primitive for abelian and for su(2) at kappa = 0", ok, elapsed, 5.0,
           "nonprimitive at kappa = 1" if deformed else "")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
