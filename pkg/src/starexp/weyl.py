"""Normal-ordered elements of the semicompleted Weyl algebra.

An element is a finite sum ``sum_alpha x^alpha * G_alpha(d)`` with every
coordinate to the left of every derivative.  The coefficient series
``G_alpha`` live in a ring whose first ``n`` variables are the derivatives
``d_1..d_n``; further variables (such as a formal parameter ``lam``) are
central and never take part in commutation.

Moving ``G(d)`` past ``x^beta`` uses the higher Leibniz rule

    G(d) x^beta = sum_gamma binom(beta, gamma) x^(beta - gamma) (d^gamma G)(d)

where ``d^gamma G`` differentiates ``G`` with respect to its derivative
variables.  Each such derivative costs one certified order, which the
series arithmetic tracks on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

from .fps import (
    DimensionError,
    GaussRational,
    OrderBudgetError,
    SeriesError,
    TruncatedSeries,
    compose,
    graded_lex_key,
)
from .realization import Realization

__all__ = [
    "UnsupportedShapeError",
    "WeylElement",
    "commutator",
    "realize_generators",
    "HomomorphismReport",
    "check_lie_homomorphism",
    "weyl_exp_bruteforce",
    "FockPrefactor",
    "fock_apply_exp",
]


class UnsupportedShapeError(SeriesError):
    """The operation only supports elements linear in the coordinates."""


def _sub_indices(beta: tuple) -> Iterable[tuple]:
    return product(*(range(b + 1) for b in beta))


def _binom_multi(beta: tuple, gamma: tuple) -> int:
    out = 1
    for b, g in zip(beta, gamma):
        out *= math.comb(b, g)
    return out


class WeylElement:
    """Normal-ordered Weyl algebra element.

    Parameters
    ----------
    n : int
        Number of coordinate/derivative pairs.
    terms : mapping
        Coordinate exponent tuple -> :class:`TruncatedSeries` coefficient.
    coef_vars : int, optional
        Variables of the coefficient ring (``>= n``); the first ``n`` are the
        derivatives.  Defaults to ``n``.
    order : int, optional
        Certified order of the coefficients; required when ``terms`` is empty.
    """

    __slots__ = ("n", "coef_vars", "terms", "d_order")

    def __init__(self, n: int, terms: Mapping | None = None, coef_vars: int | None = None, order: int | None = None):
        self.n = n
        self.coef_vars = n if coef_vars is None else coef_vars
        if self.coef_vars < n:
            raise DimensionError("coefficient ring must contain the derivative variables")
        clean = {}
        orders = [] if order is None else [order]
        for alpha, s in (terms or {}).items():
            alpha = tuple(alpha)
            if len(alpha) != n:
                raise DimensionError(f"coordinate exponent {alpha} does not have {n} entries")
            if s.n_vars != self.coef_vars:
                raise DimensionError("coefficient series lives in the wrong ring")
            orders.append(s.order)
            if not s.is_zero():
                clean[alpha] = s
        if not orders:
            raise ValueError("order is required for an element without terms")
        self.d_order = min(orders)
        self.terms = {a: s.truncate(self.d_order) for a, s in clean.items()}

    # -- constructors -----------------------------------------------------------

    @classmethod
    def scalar(cls, n: int, order: int, value=1, coef_vars: int | None = None) -> "WeylElement":
        cv = n if coef_vars is None else coef_vars
        return cls(n, {(0,) * n: TruncatedSeries.constant(cv, order, value)}, cv, order)

    @classmethod
    def coordinate(cls, n: int, i: int, order: int, coef_vars: int | None = None) -> "WeylElement":
        cv = n if coef_vars is None else coef_vars
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): TruncatedSeries.one(cv, order)}, cv, order)

    @classmethod
    def derivative(cls, n: int, i: int, order: int, coef_vars: int | None = None) -> "WeylElement":
        cv = n if coef_vars is None else coef_vars
        return cls(n, {(0,) * n: TruncatedSeries.variable(cv, order, i)}, cv, order)

    @classmethod
    def from_series(cls, n: int, series: TruncatedSeries, alpha: Sequence[int] | None = None) -> "WeylElement":
        alpha = tuple(alpha) if alpha is not None else (0,) * n
        return cls(n, {alpha: series}, series.n_vars, series.order)

    # -- inspection -------------------------------------------------------------

    @property
    def x_order(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def sorted_terms(self) -> list[tuple[tuple, TruncatedSeries]]:
        return sorted(self.terms.items(), key=lambda t: graded_lex_key(t[0]))

    def coeff(self, alpha: Sequence[int]) -> TruncatedSeries:
        return self.terms.get(tuple(alpha), TruncatedSeries.zero(self.coef_vars, self.d_order))

    def is_zero(self) -> bool:
        return not self.terms

    def truncate(self, order: int) -> "WeylElement":
        if order > self.d_order:
            raise OrderBudgetError(f"cannot raise certified order {self.d_order} to {order}")
        return WeylElement(self.n, {a: s.truncate(order) for a, s in self.terms.items()}, self.coef_vars, order)

    def agrees_with(self, other: "WeylElement", order: int | None = None) -> bool:
        self._check(other)
        return (self - other).truncate(min(self.d_order, other.d_order) if order is None else order).is_zero()

    def __eq__(self, other):
        if not isinstance(other, WeylElement):
            return NotImplemented
        return (
            self.n == other.n
            and self.coef_vars == other.coef_vars
            and self.d_order == other.d_order
            and self.terms == other.terms
        )

    def __repr__(self):
        return f"WeylElement(n={self.n}, {self.format()})"

    def format(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return f"0 + O({self.d_order + 1})"
        xs = [f"x{i + 1}" for i in range(self.n)]
        if names is None:
            names = [f"d{i + 1}" for i in range(self.n)] + [f"t{i + 1}" for i in range(self.coef_vars - self.n)]
        parts = []
        for alpha, s in self.sorted_terms():
            mono = "*".join((xs[i] if e == 1 else f"{xs[i]}^{e}") for i, e in enumerate(alpha) if e)
            body = s.format(names).rsplit(" + O(", 1)[0]
            parts.append(f"{mono}*({body})" if mono else f"({body})")
        return " + ".join(parts) + f" + O({self.d_order + 1})"

    def to_records(self) -> list[dict]:
        out = []
        for alpha, s in self.sorted_terms():
            for rec in s.to_records():
                out.append({"x_exponents": list(alpha), **rec})
        return out

    # -- arithmetic -------------------------------------------------------------

    def _check(self, other: "WeylElement") -> None:
        if self.n != other.n or self.coef_vars != other.coef_vars:
            raise DimensionError("Weyl elements live in different algebras")

    def __add__(self, other: "WeylElement") -> "WeylElement":
        self._check(other)
        order = min(self.d_order, other.d_order)
        terms = dict(self.terms)
        for a, s in other.terms.items():
            terms[a] = terms[a] + s if a in terms else s
        return WeylElement(self.n, terms, self.coef_vars, order)

    def __neg__(self) -> "WeylElement":
        return WeylElement(self.n, {a: -s for a, s in self.terms.items()}, self.coef_vars, self.d_order)

    def __sub__(self, other: "WeylElement") -> "WeylElement":
        return self + (-other)

    def scale(self, c) -> "WeylElement":
        if isinstance(c, TruncatedSeries):
            return WeylElement(self.n, {a: s * c for a, s in self.terms.items()}, self.coef_vars, min(self.d_order, c.order))
        return WeylElement(self.n, {a: s.scale(c) for a, s in self.terms.items()}, self.coef_vars, self.d_order)

    def __mul__(self, other):
        if not isinstance(other, WeylElement):
            return self.scale(other)
        self._check(other)
        n = self.n
        result: dict = {}
        orders = [min(self.d_order, other.d_order)]
        partial_cache: dict = {}

        def deriv(alpha, gamma):
            key = (alpha, gamma)
            if key not in partial_cache:
                if not any(gamma):
                    partial_cache[key] = self.terms[alpha]
                else:
                    # peel one derivative off the last nonzero slot
                    j = max(i for i, g in enumerate(gamma) if g)
                    prev = list(gamma)
                    prev[j] -= 1
                    partial_cache[key] = deriv(alpha, tuple(prev)).partial(j)
            return partial_cache[key]

        for beta, H in other.terms.items():
            for gamma in _sub_indices(beta):
                c = _binom_multi(beta, gamma)
                rest = tuple(b - g for b, g in zip(beta, gamma))
                for alpha, _ in self.terms.items():
                    term = deriv(alpha, gamma) * H
                    if c != 1:
                        term = term.scale(c)
                    orders.append(term.order)
                    target = tuple(a + r for a, r in zip(alpha, rest))
                    result[target] = result[target] + term if target in result else term
        return WeylElement(n, result, self.coef_vars, min(orders))

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, m: int) -> "WeylElement":
        result = WeylElement.scalar(self.n, self.d_order, 1, self.coef_vars)
        for _ in range(m):
            result = result * self
        return result


def commutator(a: WeylElement, b: WeylElement) -> WeylElement:
    return a * b - b * a


def realize_generators(r: Realization, d_order: int | None = None) -> list[WeylElement]:
    """Generators ``xhat_j = sum_a x_a phi[a][j](d)`` as Weyl elements."""
    order = r.order if d_order is None else d_order
    if order > r.order:
        raise OrderBudgetError(f"realization only known through order {r.order}")
    n = r.n
    gens = []
    for j in range(n):
        terms = {}
        for a in range(n):
            alpha = [0] * n
            alpha[a] = 1
            terms[tuple(alpha)] = r.phi[a][j].truncate(order)
        gens.append(WeylElement(n, terms, n, order))
    return gens


@dataclass
class HomomorphismReport:
    """Outcome of :func:`check_lie_homomorphism`.

    ``worst`` holds ``(i, j, x_exponents, d_exponents, coefficient)`` for the
    lowest-order nonzero residual term, or ``None`` on success.
    """

    passed: bool
    order: int
    failures: list = field(default_factory=list)
    worst: tuple | None = None

    def summary(self) -> str:
        if self.passed:
            return f"commutation relations hold through order {self.order}"
        i, j, alpha, e, c = self.worst
        return (
            f"commutation relations fail for {len(self.failures)} pair(s); worst (i,j)=({i + 1},{j + 1}) "
            f"term {c} * x^{list(alpha)} d^{list(e)} at derivative order {sum(e)}"
        )


def check_lie_homomorphism(r: Realization, d_order: int | None = None) -> HomomorphismReport:
    """Check ``[xhat_i, xhat_j] = sum_k C^k_ij xhat_k`` exactly in normal order."""
    gens = realize_generators(r, d_order)
    n = r.n
    failures = []
    worst = None
    cert = gens[0].d_order if gens else 0
    for i in range(n):
        for j in range(i + 1, n):
            res = commutator(gens[i], gens[j])
            for k in range(n):
                c = r.constants(i, j, k)
                if c:
                    res = res - gens[k].scale(c)
            cert = min(cert, res.d_order)
            if res.is_zero():
                continue
            failures.append((i, j))
            for alpha, s in res.sorted_terms():
                e, c = s.terms()[0]
                cand = (i, j, alpha, e, c)
                if worst is None or sum(e) < sum(worst[3]):
                    worst = cand
    return HomomorphismReport(not failures, cert, failures, worst)


def weyl_exp_bruteforce(a: WeylElement, lambda_order: int) -> WeylElement:
    """``exp(lam * a)`` by summing ``lam^m a^m / m!`` with normal-ordered products.

    ``lam`` is adjoined as one extra central variable, placed last in the
    coefficient ring.  The result is exact through joint order
    ``min(lambda_order, a.d_order)`` in the derivative variables and ``lam``.
    """
    if a.x_order > 1:
        raise UnsupportedShapeError("only elements linear in the coordinates are supported")
    n = a.n
    cv = a.coef_vars + 1
    order = min(lambda_order, a.d_order)
    lam = TruncatedSeries.variable(cv, order, cv - 1)
    positions = list(range(a.coef_vars))
    lifted = WeylElement(
        n,
        {alpha: s.embed(cv, positions).truncate(order) * lam for alpha, s in a.terms.items()},
        cv,
        order,
    )
    result = WeylElement.scalar(n, order, 1, cv)
    term = result
    for m in range(1, order + 1):
        term = (term * lifted).scale(GaussRational(1) / m)
        result = result + term
    return result


@dataclass
class FockPrefactor:
    """Result of applying a normal-ordered element to ``exp(q.x)``.

    ``x^alpha G_alpha(d)`` acting on ``exp(q.x)`` gives
    ``x^alpha G_alpha(q) exp(q.x)``; ``terms`` maps ``alpha`` to ``G_alpha(q)``.
    ``ring`` names the coefficient ring: ``"formal"`` keeps the derivative
    slots as the formal ``q`` variables, ``"evaluated"`` means the ``q``
    slots were substituted and removed.
    """

    n: int
    terms: dict
    ring: str
    order: int

    def coeff(self, alpha: Sequence[int]) -> TruncatedSeries | None:
        return self.terms.get(tuple(alpha))


def fock_apply_exp(w: WeylElement, q: Sequence | None = None, polynomial: bool = False) -> FockPrefactor:
    """Apply ``w`` to the plane wave ``exp(q.x)`` and return the prefactor.

    Parameters
    ----------
    w : WeylElement
    q : sequence of exact scalars, optional
        ``None`` keeps ``q`` formal (the derivative slots are read as ``q``).
        Zeros give the vacuum projection.  Other values are only exact when
        every coefficient of ``w`` is a polynomial, which must be asserted with
        ``polynomial=True``.
    """
    n = w.n
    if q is None:
        return FockPrefactor(n, dict(w.terms), "formal", w.d_order)
    q = [GaussRational.coerce(v) for v in q]
    if len(q) != n:
        raise DimensionError("q must have one entry per coordinate")
    extra = list(range(n, w.coef_vars))
    if not any(q):
        terms = {a: s.restrict(extra) for a, s in w.terms.items()} if extra else {
            a: TruncatedSeries.constant(0, s.order, s.constant_term()) for a, s in w.terms.items()
        }
        terms = {a: s for a, s in terms.items() if not s.is_zero()}
        return FockPrefactor(n, terms, "evaluated", w.d_order)
    if not polynomial:
        raise SeriesError("substituting nonzero q into a truncated series is not exact; pass polynomial=True")
    m = len(extra)
    terms = {}
    for a, s in w.terms.items():
        args = [TruncatedSeries.constant(m, s.order, v) for v in q] + [
            TruncatedSeries.variable(m, s.order, i) for i in range(m)
        ]
        if m == 0:
            val = GaussRational(0)
            for e, c in s.terms():
                t = c
                for qi, ei in zip(q, e):
                    t = t * qi**ei
                val = val + t
            res = TruncatedSeries.constant(0, s.order, val)
        else:
            res = compose(s, args, polynomial=True)
        if not res.is_zero():
            terms[a] = res
    return FockPrefactor(n, terms, "evaluated", w.d_order)
