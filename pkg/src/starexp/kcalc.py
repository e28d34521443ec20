"""Exponent transport, star products and coproducts.

For series ``F_1..F_n`` in the derivatives the operator identity

    exp(lam * sum_i x_i F_i(d)) exp(q.x) = exp(K(lam, q).x)

defines the exponent-transport map ``K``.  This module computes it in three
independent ways:

* from the double sequence ``A_{s,l}`` (:func:`a_sequence`), whose
  ``A_{e_i,l}`` give the normal-ordered exponential;
* by the formal solution ``K_i = q_i + sum_m lam^m O^(m-1)(F_i)/m!`` with
  ``O = sum_i F_i(q) d/dq_i`` (:func:`k_series_formal_solution`);
* numerically, in :mod:`starexp.numeric`.

For a realization the generic construction is specialised to
``F_a(q) = sum_j k_j psi_aj(q)`` where ``psi`` is the realization grid with
every derivative ``d_c`` replaced by ``i q_c``.  This is the momentum
convention ``exp(i k.xhat) exp(i q.x) = exp(i K(k, q).x)``; real
realizations then give real series.  The star product of plane waves is
``D(k, q) = K(K0^-1(k), q)`` with ``K0(k) = K(k, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

from .fps import (
    DimensionError,
    GaussRational,
    I,
    OrderBudgetError,
    SeriesVector,
    TruncatedSeries,
    compose,
    invert_formal_map,
)
from .realization import Realization
from .weyl import FockPrefactor, WeylElement

__all__ = [
    "ASequence",
    "a_sequence",
    "RecursionReport",
    "verify_integral_recursion",
    "normal_ordered_exp",
    "k_series_lambda_one",
    "KSeries",
    "k_series_formal_solution",
    "k_from_fock",
    "pde_residuals",
    "flow_matrix",
    "k_series_realization",
    "DSeries",
    "d_series",
    "star_exponentials",
    "Coproduct",
    "coproduct_momenta",
    "compose_d",
]


# -- the double sequence ------------------------------------------------------------


def _unit(n: int, i: int) -> tuple:
    e = [0] * n
    e[i] = 1
    return tuple(e)


@dataclass
class ASequence:
    """Table of ``A_{s,l}`` for ``|s| <= l <= max_l``.

    ``s`` is a multi-index with one entry per derivation; entries outside
    the stored range are zero by definition.  With ``max_s`` set only
    ``|s| <= max_s`` is stored.
    """

    n: int
    F: SeriesVector
    max_l: int
    table: dict
    max_s: int | None = None

    def get(self, s: Sequence[int], l: int) -> TruncatedSeries:
        s = tuple(s)
        if len(s) != self.n:
            raise DimensionError(f"multi-index {s} does not have {self.n} entries")
        if l > self.max_l:
            raise OrderBudgetError(f"table only computed through l = {self.max_l}")
        if min(s) < 0 or sum(s) > l or (l > 0 and not any(s)):
            return TruncatedSeries.zero(self.F.n_vars, self.F.order)
        if self.max_s is not None and sum(s) > self.max_s:
            raise OrderBudgetError(f"table only computed for |s| <= {self.max_s}")
        return self.table[(s, l)]

    def indices(self, total: int) -> list[tuple]:
        """All multi-indices ``s`` with ``|s| = total``."""
        return [s for s in product(range(total + 1), repeat=self.n) if sum(s) == total]


def a_sequence(F: Sequence[TruncatedSeries], max_l: int, max_s: int | None = None) -> ASequence:
    """Compute ``A_{s,l+1} = sum_i F_i (d_i A_{s,l} + A_{s-e_i,l})``.

    ``d_i`` differentiates with respect to the ``i``-th variable of the ring
    the ``F_i`` live in.  Starting values are ``A_{0,0} = 1`` and
    ``A_{s,0} = 0`` for ``s != 0``.  The recursion never raises ``|s|``, so
    ``max_s`` cuts the table without affecting the stored entries.
    """
    F = SeriesVector(F)
    n = len(F)
    if F.n_vars != n:
        raise DimensionError("need one F_i per ring variable")
    order = F.order
    zero = TruncatedSeries.zero(n, order)
    table = {((0,) * n, 0): TruncatedSeries.one(n, order)}
    for l in range(max_l):
        for total in range(0, (l + 2) if max_s is None else min(l + 2, max_s + 1)):
            for s in product(range(total + 1), repeat=n):
                if sum(s) != total:
                    continue
                acc = zero
                for i in range(n):
                    inner = zero
                    prev = table.get((s, l))
                    if prev is not None and not prev.is_zero():
                        if prev.order == 0 and F[i].valuation() == 0:
                            raise OrderBudgetError(
                                f"A_{{{s},{l}}} has no certified derivative; raise the order of F"
                            )
                        inner = inner + prev.partial(i)
                    if s[i]:
                        lower = list(s)
                        lower[i] -= 1
                        down = table.get((tuple(lower), l))
                        if down is not None:
                            inner = inner + down
                    if not inner.is_zero():
                        acc = acc + F[i] * inner
                table[(s, l + 1)] = acc
    return ASequence(n, F, max_l, table, max_s)


@dataclass
class RecursionReport:
    """Outcome of :func:`verify_integral_recursion`."""

    passed: bool
    checked: int
    violations: list = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return f"integral recursion and multinomial identities hold ({self.checked} checks)"
        return f"{len(self.violations)} of {self.checked} identities fail; first: {self.violations[0]}"


def _compositions(total: int, parts: int) -> Iterable[tuple]:
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multi_compositions(s: tuple, parts: int) -> Iterable[tuple]:
    """Ordered splits of the multi-index ``s`` into ``parts`` nonzero multi-indices."""
    if parts == 1:
        if any(s):
            yield (s,)
        return
    for first in product(*(range(x + 1) for x in s)):
        if not any(first):
            continue
        rest = tuple(a - b for a, b in zip(s, first))
        for tail in _multi_compositions(rest, parts - 1):
            yield (first,) + tail


def _mfact(s: Sequence[int]) -> int:
    out = 1
    for x in s:
        out *= math.factorial(x)
    return out


def verify_integral_recursion(a: ASequence, max_parts: int = 3, max_s: int | None = None) -> RecursionReport:
    """Check the integral recursion and its multinomial refinement exactly.

    For every ``i`` with ``s_i >= 1`` and ``|s| >= 2``

        s_i A_{s,l} = sum_r binom(l, r) A_{e_i,r} A_{s-e_i,l-r}

    and for splits ``s = s^(1) + ... + s^(k)`` into nonzero parts with
    ``2 <= k <= max_parts``

        prod_i s_i! / prod_{i,j} s^(j)_i! A_{s,l}
            = sum_{l_1+..+l_k = l, l_j >= 1} l!/(l_1!..l_k!) A_{s^(1),l_1} .. A_{s^(k),l_k}.
    """
    n = a.n
    violations = []
    checked = 0
    pair_cache: dict = {}

    def pair_sum(s1: tuple, s2: tuple, l: int) -> TruncatedSeries:
        # sum over l1 + l2 = l, l1, l2 >= 1 of binom(l, l1) A_{s1,l1} A_{s2,l2}
        key = (s1, s2, l)
        if key not in pair_cache:
            acc = None
            for l1 in range(sum(s1), l - sum(s2) + 1):
                if l1 < 1 or l - l1 < 1:
                    continue
                term = (a.get(s1, l1) * a.get(s2, l - l1)).scale(math.comb(l, l1))
                acc = term if acc is None else acc + term
            pair_cache[key] = acc if acc is not None else TruncatedSeries.zero(a.F.n_vars, a.F.order)
        return pair_cache[key]

    top = a.max_s if max_s is None else max_s
    if a.max_s is not None and top > a.max_s:
        raise OrderBudgetError(f"table only computed for |s| <= {a.max_s}")
    for l in range(2, a.max_l + 1):
        for total in range(2, (l if top is None else min(l, top)) + 1):
            for s in a.indices(total):
                lhs_base = a.get(s, l)
                # integral recursion, one unit split off
                for i in range(n):
                    if not s[i]:
                        continue
                    ei = _unit(n, i)
                    rest = tuple(x - y for x, y in zip(s, ei))
                    rhs = pair_sum(ei, rest, l)
                    checked += 1
                    if not (lhs_base.scale(s[i]) - rhs).is_zero():
                        violations.append(("recursion", s, l, i))
                # multinomial identity
                for k in range(2, max_parts + 1):
                    if k > total:
                        break
                    for parts in _multi_compositions(s, k):
                        coef = _mfact(s) // math.prod(_mfact(p) for p in parts)
                        lhs = lhs_base.scale(coef)
                        rhs = _k_sum(a, parts, l, pair_sum)
                        if rhs is None:
                            rhs = TruncatedSeries.zero(lhs.n_vars, lhs.order)
                        checked += 1
                        if not (lhs - rhs).is_zero():
                            violations.append(("multinomial", s, l, parts))
    return RecursionReport(not violations, checked, violations)


def _k_sum(a: ASequence, parts: tuple, l: int, pair_sum) -> TruncatedSeries | None:
    if len(parts) == 2:
        return pair_sum(parts[0], parts[1], l)
    acc = None
    merged = tuple(map(sum, zip(*parts[1:])))
    for l1 in range(max(1, sum(parts[0])), l - sum(merged) + 1):
        inner = _k_sum(a, parts[1:], l - l1, pair_sum)
        if inner is None:
            continue
        term = (a.get(parts[0], l1) * inner).scale(math.comb(l, l1))
        acc = term if acc is None else acc + term
    return acc


# -- normal-ordered exponential --------------------------------------------------------


def _alpha(a: ASequence, joint_order: int) -> list[TruncatedSeries]:
    n = a.n
    cv = n + 1
    positions = list(range(n))
    out = []
    for i in range(n):
        acc = TruncatedSeries.zero(cv, joint_order)
        for l in range(1, joint_order + 1):
            A = a.get(_unit(n, i), l)
            if A.is_zero():
                continue
            lam_l = [0] * cv
            lam_l[n] = l
            acc = acc + A.embed(cv, positions).mul_monomial(lam_l, GaussRational(1) / math.factorial(l))
        out.append(acc)
    return out


def normal_ordered_exp(F: Sequence[TruncatedSeries], joint_order: int) -> WeylElement:
    """``exp(lam x.F)`` as ``sum_s x^s alpha^s / s!`` with ``alpha_i = sum_l lam^l A_{e_i,l}/l!``.

    The coefficient ring is ``(d_1..d_n, lam)`` and the result is exact
    through joint order ``joint_order`` in those variables.
    """
    F = SeriesVector(F)
    n = len(F)
    if F.order < joint_order - 1:
        raise OrderBudgetError(f"F must be known through order {joint_order - 1}")
    a = a_sequence(F, joint_order)
    alpha = _alpha(a, joint_order)
    for s in alpha:
        if s.order < joint_order:
            raise OrderBudgetError("order budget exhausted while building alpha")
    cv = n + 1
    terms = {}
    powers: dict = {(0,) * n: TruncatedSeries.one(cv, joint_order)}
    for total in range(0, joint_order + 1):
        for s in product(range(total + 1), repeat=n):
            if sum(s) != total:
                continue
            if total:
                j = max(i for i, x in enumerate(s) if x)
                prev = list(s)
                prev[j] -= 1
                powers[s] = powers[tuple(prev)] * alpha[j]
            val = powers[s].scale(GaussRational(1) / _mfact(s))
            if not val.is_zero():
                terms[s] = val
    return WeylElement(n, terms, cv, joint_order)


def k_series_lambda_one(F: Sequence[TruncatedSeries], order: int) -> SeriesVector:
    """``K_i = q_i + sum_l A_{e_i,l}(q)/l!`` at ``lam = 1``.

    Summing at ``lam = 1`` only converges formally when every ``F_i`` has
    valuation at least 2, so that ``A_{e_i,l}`` starts at degree ``l + 1``.
    """
    F = SeriesVector(F)
    n = len(F)
    for f in F:
        v = f.valuation()
        if v is not None and v < 2:
            raise OrderBudgetError("lam = 1 needs every F_i to vanish to second order")
    if F.order < order:
        raise OrderBudgetError(f"F must be known through order {order}")
    a = a_sequence([f.truncate(order) for f in F], order)
    out = []
    for i in range(n):
        acc = TruncatedSeries.variable(n, order, i)
        for l in range(1, order + 1):
            acc = acc + a.get(_unit(n, i), l).scale(GaussRational(1) / math.factorial(l))
        out.append(acc.truncate(order))
    return SeriesVector(out)


# -- K series ------------------------------------------------------------------------


@dataclass(frozen=True)
class KSeries:
    """Vector ``K`` together with the meaning of its ring variables.

    Attributes
    ----------
    mode : {"generic", "realization"}
    components : SeriesVector
    variables : tuple of str
        Display names of the ring slots.
    q_slots, k_slots : tuple of int
    lambda_slot : int or None
    meta : dict
        Realization name, digest and kappa when applicable.
    """

    mode: str
    components: SeriesVector
    variables: tuple
    q_slots: tuple
    k_slots: tuple = ()
    lambda_slot: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def order(self) -> int:
        return self.components.order

    def boundary(self) -> SeriesVector:
        """``K`` with the ``k`` block (or ``lam``) set to zero; must equal ``q``."""
        drop = list(self.k_slots) + ([self.lambda_slot] if self.lambda_slot is not None else [])
        return SeriesVector(c.subs_zero(drop) for c in self.components)

    def k0(self) -> SeriesVector:
        """``K0(k) = K(k, 0)`` as series in the ``k`` variables alone."""
        if self.mode != "realization":
            raise ValueError("K0 is only defined in realization mode")
        return SeriesVector(c.restrict(self.k_slots) for c in self.components)


def k_series_formal_solution(F: Sequence[TruncatedSeries], order: int) -> KSeries:
    """Formal solution of ``dK/dlam = F(K)``, ``K(0, q) = q``.

    The result lives in the ring ``(q_1..q_n, lam)`` and is exact through
    joint order ``order``.
    """
    F = SeriesVector(F)
    n = len(F)
    if F.n_vars != n:
        raise DimensionError("need one F_i per ring variable")
    if F.order < order - 1:
        raise OrderBudgetError(f"F must be known through order {order - 1}")
    cv = n + 1
    lam = TruncatedSeries.variable(cv, order, n)
    Ft = [(f.embed(cv, list(range(n))) * lam).truncate(order) for f in F]
    comps = _formal_solution(Ft, list(range(n)), order)
    names = tuple(f"q{i + 1}" for i in range(n)) + ("lam",)
    return KSeries("generic", SeriesVector(comps), names, tuple(range(n)), (), n)


def _apply_O(F: Sequence[TruncatedSeries], slots: Sequence[int], T: TruncatedSeries) -> TruncatedSeries:
    acc = None
    for f, slot in zip(F, slots):
        d = T.partial(slot)
        if d.is_zero():
            continue
        term = f * d
        acc = term if acc is None else acc + term
    if acc is None:
        return TruncatedSeries.zero(T.n_vars, T.order)
    return acc


def _formal_solution(F: Sequence[TruncatedSeries], q_slots: Sequence[int], order: int) -> list[TruncatedSeries]:
    """``K_a = q_a + sum_{m>=1} O^(m-1)(F_a)/m!`` where every ``F`` has positive valuation."""
    cv = F[0].n_vars
    out = []
    for a, slot in enumerate(q_slots):
        acc = TruncatedSeries.variable(cv, order, slot)
        T = F[a]
        for m in range(1, order + 1):
            if T.is_zero():
                break
            acc = acc + T.scale(GaussRational(1) / math.factorial(m))
            if m < order:
                T = _apply_O(F, q_slots, T)
                if T.order > order:
                    T = T.truncate(order)
        if acc.order < order:
            raise OrderBudgetError(f"only order {acc.order} could be certified, {order} requested")
        out.append(acc.truncate(order))
    return out


def k_from_fock(prefactor: FockPrefactor) -> SeriesVector:
    """Read ``K = q + alpha`` off the Fock prefactor ``exp(x.alpha(q))``.

    The prefactor must be exponential: its ``x^s`` coefficient has to equal
    ``alpha^s/s!`` with ``alpha_i`` read from the linear terms.
    """
    if prefactor.ring != "formal":
        raise ValueError("the exponent can only be read from a formal-q prefactor")
    n = prefactor.n
    one = prefactor.coeff((0,) * n)
    if one is None or one.constant_term() != 1:
        raise ValueError("prefactor is not exponential: constant coefficient is not 1")
    cv = one.n_vars
    order = prefactor.order
    alpha = [prefactor.coeff(_unit(n, i)) or TruncatedSeries.zero(cv, order) for i in range(n)]
    for s, c in prefactor.terms.items():
        want = TruncatedSeries.one(cv, order)
        for i, e in enumerate(s):
            for _ in range(e):
                want = want * alpha[i]
        want = want.scale(GaussRational(1) / _mfact(s))
        if not (c - want).truncate(min(order, c.order, want.order)).is_zero():
            raise ValueError(f"prefactor is not exponential at x^{list(s)}")
    return SeriesVector(TruncatedSeries.variable(cv, order, i) + alpha[i] for i in range(n))


def pde_residuals(F: Sequence[TruncatedSeries], K: KSeries) -> list[TruncatedSeries]:
    """Residuals of ``sum_i F_i(q) dK_j/dq_i = dK_j/dlam`` and ``F_j(K) = dK_j/dlam``.

    Returns ``2n`` series, the first ``n`` for the transport form and the
    rest for the characteristic form, each certified through ``K.order - 1``.
    """
    if K.mode != "generic":
        raise ValueError("the PDE check is stated for generic mode")
    n = K.n
    cv = n + 1
    Fq = [f.embed(cv, list(range(n))) for f in F]
    lam = K.lambda_slot
    out = []
    for j in range(n):
        Kj = K.components[j]
        lhs = TruncatedSeries.zero(cv, Kj.order)
        for i in range(n):
            lhs = lhs + Fq[i] * Kj.partial(i)
        out.append(lhs - Kj.partial(lam))
    args = list(K.components)
    for j in range(n):
        Kj = K.components[j]
        out.append(compose(F[j], args) - Kj.partial(lam))
    return out


def flow_matrix(r: Realization, order: int | None = None) -> list[list[TruncatedSeries]]:
    """Momentum-space grid ``psi[a][j](q) = phi[a][j](i q)``."""
    order = r.order if order is None else order
    return [[r.phi[a][j].truncate(order).scale_vars([I] * r.n) for j in range(r.n)] for a in range(r.n)]


def k_series_realization(r: Realization, order: int) -> KSeries:
    """``K(k, q)`` with ``exp(i k.xhat) exp(i q.x) = exp(i K.x)`` in the ring ``(k, q)``."""
    if order > r.order:
        raise OrderBudgetError(f"realization only known through order {r.order}; requested {order}")
    n = r.n
    cv = 2 * n
    psi = flow_matrix(r, order)
    qpos = list(range(n, 2 * n))
    F = []
    for a in range(n):
        acc = TruncatedSeries.zero(cv, order)
        for j in range(n):
            kj = TruncatedSeries.variable(cv, order, j)
            acc = acc + kj * psi[a][j].embed(cv, qpos)
        F.append(acc.truncate(order))
    comps = _formal_solution(F, qpos, order)
    names = tuple(f"k{i + 1}" for i in range(n)) + tuple(f"q{i + 1}" for i in range(n))
    meta = {"realization": r.name, "digest": r.digest(), "kappa": str(r.kappa)}
    return KSeries("realization", SeriesVector(comps), names, tuple(qpos), tuple(range(n)), None, meta)


# -- star product ---------------------------------------------------------------------


@dataclass(frozen=True)
class DSeries:
    """Star-product exponent ``D(k, q)`` plus the maps used to build it."""

    components: SeriesVector
    k0: SeriesVector
    k0_inverse: SeriesVector
    K: KSeries
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def order(self) -> int:
        return self.components.order

    @property
    def variables(self) -> tuple:
        return self.K.variables


def d_series(r: Realization, order: int) -> DSeries:
    """``D(k, q) = K(K0^-1(k), q)``."""
    K = k_series_realization(r, order)
    n = r.n
    k0 = K.k0()
    k0inv = invert_formal_map(k0)
    cv = 2 * n
    args = [g.embed(cv, list(range(n))) for g in k0inv] + [
        TruncatedSeries.variable(cv, order, n + i) for i in range(n)
    ]
    comps = [compose(c, args) for c in K.components]
    return DSeries(SeriesVector(comps), k0, k0inv, K, dict(K.meta))


def star_exponentials(r: Realization, order: int) -> DSeries:
    """Exponent of ``exp(i k.x) * exp(i q.x) = exp(i D(k, q).x)``; same as :func:`d_series`."""
    return d_series(r, order)


def compose_d(D: Sequence[TruncatedSeries], left: Sequence[TruncatedSeries], right: Sequence[TruncatedSeries]) -> SeriesVector:
    """``D(left, right)`` for vectors ``left``, ``right`` in any common ring."""
    args = list(left) + list(right)
    return SeriesVector(compose(c, args) for c in D)


# -- coproduct ------------------------------------------------------------------------


@dataclass(frozen=True)
class Coproduct:
    """``Delta(d_j)`` as a series in ``(u, v)`` with ``u = d (x) 1`` and ``v = 1 (x) d``."""

    j: int
    series: TruncatedSeries
    dictionary: dict
    meta: dict = field(default_factory=dict, compare=False)

    def primitive(self) -> TruncatedSeries:
        n = self.series.n_vars // 2
        return TruncatedSeries.variable(2 * n, self.series.order, self.j) + TruncatedSeries.variable(
            2 * n, self.series.order, n + self.j
        )

    def is_primitive(self) -> bool:
        return (self.series - self.primitive()).is_zero()


def coproduct_momenta(r: Realization, j: int, order: int, d: DSeries | None = None) -> Coproduct:
    """``Delta(d_j) = i D_j(-i u, -i v)`` in the doubled ring ``(u, v)``."""
    if d is None:
        d = d_series(r, order)
    n = r.n
    if not 0 <= j < n:
        raise IndexError(f"component {j} out of range")
    series = d.components[j].scale_vars([-I] * (2 * n)).scale(I)
    dictionary = {
        **{f"k{a + 1}": f"-i*(d{a + 1} (x) 1)" for a in range(n)},
        **{f"q{a + 1}": f"-i*(1 (x) d{a + 1})" for a in range(n)},
        "overall": "i",
    }
    return Coproduct(j, series, dictionary, dict(d.meta))
