"""Exact sparse multivariate truncated power series over the Gaussian rationals.

A :class:`TruncatedSeries` is a *jet*: every coefficient of total degree
``<= order`` is known exactly and everything above the order is unknown
(not zero).  Operations propagate that certified order, so a result never
claims more precision than its inputs support.

Internally a monomial ``x^e`` is packed into one integer whose top digit is
the total degree and whose low digits are the exponents, so multiplying
monomials is integer addition and truncating by degree is one comparison.
Real and imaginary parts are kept in separate dicts because most series in
this package are real and then only one product per pair of terms is needed.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from gmpy2 import mpq

__all__ = [
    "SeriesError",
    "DimensionError",
    "CompositionDivergenceError",
    "AnalyticDomainError",
    "NotInvertibleError",
    "OrderBudgetError",
    "GaussRational",
    "I",
    "TruncatedSeries",
    "SeriesVector",
    "graded_lex_key",
    "compose",
    "analytic",
    "exp",
    "log",
    "sqrt",
    "pow_rational",
    "ucoth_sq",
    "apply_univariate",
    "univariate_coefficients",
    "bernoulli",
    "invert_formal_map",
    "rasevskii_norm",
    "BUILTIN_FUNCTIONS",
]

_BITS = 8
_MASK = (1 << _BITS) - 1
MAX_ORDER = _MASK


class SeriesError(ValueError):
    """Base class for errors raised by series arithmetic."""


class DimensionError(SeriesError):
    """Operands live in rings with different numbers of variables."""


class CompositionDivergenceError(SeriesError):
    """Substituting a series with a nonzero constant term into an infinite series."""


class AnalyticDomainError(SeriesError):
    """An analytic function was applied outside the constant-term domain it needs."""


class NotInvertibleError(SeriesError):
    """A formal map is not tangent to the identity."""


class OrderBudgetError(SeriesError):
    """Not enough certified order is left to produce the requested coefficients."""


def _q(x) -> mpq:
    if isinstance(x, mpq):
        return x
    if isinstance(x, (int, Fraction)):
        return mpq(x)
    if isinstance(x, str):
        return mpq(Fraction(x.strip()))
    if isinstance(x, float):
        raise TypeError("floating-point values are not exact; pass a Fraction or a string")
    return mpq(x)


class GaussRational:
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _q(re)
        self.im = _q(im)

    @classmethod
    def coerce(cls, value) -> "GaussRational":
        if isinstance(value, GaussRational):
            return value
        if isinstance(value, complex):
            raise TypeError("complex floats are not exact")
        return cls(value)

    def is_real(self) -> bool:
        return not self.im

    def conjugate(self) -> "GaussRational":
        return GaussRational(self.re, -self.im)

    def abs2(self) -> mpq:
        """Squared modulus, exact."""
        return self.re * self.re + self.im * self.im

    def __add__(self, other):
        try:
            o = GaussRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            o = GaussRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussRational.coerce(other) - self

    def __neg__(self):
        return GaussRational(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return NotImplemented
        try:
            o = GaussRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return NotImplemented
        o = GaussRational.coerce(other)
        d = o.abs2()
        if not d:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussRational((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        return GaussRational.coerce(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return GaussRational(1) / (self ** (-n))
        result, base = GaussRational(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GaussRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction, mpq)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussRational({self.re}, {self.im})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}*i"
        sign = "-" if self.im < 0 else "+"
        return f"({self.re} {sign} {abs(self.im)}*i)"


I = GaussRational(0, 1)


def graded_lex_key(exps: Sequence[int]) -> tuple:
    """Sort key: total degree first, then lexicographic with x1 ranking highest."""
    return (sum(exps), tuple(-e for e in exps))


def _pack(exps: Sequence[int]) -> int:
    key = 0
    deg = 0
    for i, e in enumerate(exps):
        if e < 0 or e > _MASK:
            raise ValueError(f"exponent {e} out of range")
        key |= e << (_BITS * i)
        deg += e
    return key | (deg << (_BITS * len(exps)))


def _unpack(key: int, n: int) -> tuple[int, ...]:
    return tuple((key >> (_BITS * i)) & _MASK for i in range(n))


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


def _mul_dicts(a: dict, b_sorted: list, b_keys: list, limit: int, out: dict, sign: int = 1) -> None:
    get = out.get
    for ka, ca in a.items():
        cut = bisect_left(b_keys, limit - ka)
        if not cut:
            continue
        if sign < 0:
            ca = -ca
        for kb, cb in b_sorted[:cut]:
            k = ka + kb
            out[k] = get(k, 0) + ca * cb


def _sorted_items(d: dict) -> tuple[list, list]:
    items = sorted(d.items())
    return items, [k for k, _ in items]


class TruncatedSeries:
    """Multivariate power series jet with exact Gaussian-rational coefficients.

    Parameters
    ----------
    n_vars : int
        Number of ring variables.
    order : int
        Truncation bound on total degree; coefficients above it are unknown.
    terms : mapping, optional
        Exponent tuple -> coefficient (int, Fraction, str, mpq or
        :class:`GaussRational`).  Terms above ``order`` are dropped.

    Values are immutable; every operation returns a new series.
    """

    __slots__ = ("n_vars", "order", "_re", "_im")

    def __init__(self, n_vars: int, order: int, terms: Mapping | None = None):
        if n_vars < 0:
            raise ValueError("n_vars must be non-negative")
        if order < 0 or order > MAX_ORDER:
            raise ValueError(f"order must lie in [0, {MAX_ORDER}]")
        self.n_vars = n_vars
        self.order = order
        re: dict = {}
        im: dict = {}
        for exps, c in (terms or {}).items():
            exps = tuple(exps)
            if len(exps) != n_vars:
                raise DimensionError(f"exponent {exps} does not have {n_vars} entries")
            if sum(exps) > order:
                continue
            c = GaussRational.coerce(c)
            key = _pack(exps)
            if c.re:
                re[key] = re.get(key, 0) + c.re
            if c.im:
                im[key] = im.get(key, 0) + c.im
        self._re = _clean(re)
        self._im = _clean(im)

    @classmethod
    def _make(cls, n_vars: int, order: int, re: dict, im: dict) -> "TruncatedSeries":
        obj = cls.__new__(cls)
        obj.n_vars = n_vars
        obj.order = order
        obj._re = re
        obj._im = im
        return obj

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n_vars: int, order: int) -> "TruncatedSeries":
        return cls._make(n_vars, order, {}, {})

    @classmethod
    def constant(cls, n_vars: int, order: int, value) -> "TruncatedSeries":
        c = GaussRational.coerce(value)
        key = _pack((0,) * n_vars)
        return cls._make(n_vars, order, {key: c.re} if c.re else {}, {key: c.im} if c.im else {})

    @classmethod
    def one(cls, n_vars: int, order: int) -> "TruncatedSeries":
        return cls.constant(n_vars, order, 1)

    @classmethod
    def variable(cls, n_vars: int, order: int, j: int) -> "TruncatedSeries":
        """The coordinate function ``x_j`` (0-based ``j``)."""
        if not 0 <= j < n_vars:
            raise IndexError(f"variable index {j} out of range for {n_vars} variables")
        if order < 1:
            return cls.zero(n_vars, order)
        exps = [0] * n_vars
        exps[j] = 1
        return cls._make(n_vars, order, {_pack(exps): mpq(1)}, {})

    @classmethod
    def monomial(cls, n_vars: int, order: int, exps: Sequence[int], coeff=1) -> "TruncatedSeries":
        return cls(n_vars, order, {tuple(exps): coeff})

    # -- inspection ---------------------------------------------------------

    @property
    def _shift(self) -> int:
        return _BITS * self.n_vars

    def terms(self) -> list[tuple[tuple[int, ...], GaussRational]]:
        """Nonzero terms in graded-lexicographic order."""
        keys = set(self._re) | set(self._im)
        out = [
            (_unpack(k, self.n_vars), GaussRational(self._re.get(k, 0), self._im.get(k, 0)))
            for k in keys
        ]
        out.sort(key=lambda t: graded_lex_key(t[0]))
        return out

    def as_dict(self) -> dict[tuple[int, ...], GaussRational]:
        return dict(self.terms())

    def __len__(self) -> int:
        return len(set(self._re) | set(self._im))

    def coeff(self, exps: Sequence[int]) -> GaussRational:
        exps = tuple(exps)
        if len(exps) != self.n_vars:
            raise DimensionError(f"exponent {exps} does not have {self.n_vars} entries")
        if sum(exps) > self.order:
            raise OrderBudgetError(f"coefficient of degree {sum(exps)} is beyond order {self.order}")
        k = _pack(exps)
        return GaussRational(self._re.get(k, 0), self._im.get(k, 0))

    def constant_term(self) -> GaussRational:
        return self.coeff((0,) * self.n_vars)

    def is_zero(self) -> bool:
        return not self._re and not self._im

    def is_real(self) -> bool:
        return not self._im

    def valuation(self) -> int | None:
        """Lowest total degree carrying a nonzero coefficient (``None`` for zero)."""
        keys = list(self._re) + list(self._im)
        if not keys:
            return None
        return min(keys) >> self._shift

    def max_degree(self) -> int | None:
        keys = list(self._re) + list(self._im)
        if not keys:
            return None
        return max(keys) >> self._shift

    def real_part(self) -> "TruncatedSeries":
        return TruncatedSeries._make(self.n_vars, self.order, dict(self._re), {})

    def imag_part(self) -> "TruncatedSeries":
        return TruncatedSeries._make(self.n_vars, self.order, dict(self._im), {})

    def homogeneous_part(self, degree: int) -> "TruncatedSeries":
        s = self._shift
        return TruncatedSeries._make(
            self.n_vars,
            self.order,
            {k: v for k, v in self._re.items() if k >> s == degree},
            {k: v for k, v in self._im.items() if k >> s == degree},
        )

    def truncate(self, order: int) -> "TruncatedSeries":
        """Forget coefficients above ``order`` (which may not exceed the current order)."""
        if order > self.order:
            raise OrderBudgetError(f"cannot raise certified order {self.order} to {order}")
        limit = (order + 1) << self._shift
        return TruncatedSeries._make(
            self.n_vars,
            order,
            {k: v for k, v in self._re.items() if k < limit},
            {k: v for k, v in self._im.items() if k < limit},
        )

    def agrees_with(self, other: "TruncatedSeries", order: int | None = None) -> bool:
        """Exact equality of both jets through ``order`` (default: the common certified order)."""
        self._check(other)
        common = min(self.order, other.order)
        if order is None:
            order = common
        elif order > common:
            raise OrderBudgetError(f"comparison through {order} exceeds certified order {common}")
        return (self - other).truncate(order).is_zero()

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (
            self.n_vars == other.n_vars
            and self.order == other.order
            and self._re == other._re
            and self._im == other._im
        )

    def __hash__(self):
        return hash((self.n_vars, self.order, frozenset(self._re.items()), frozenset(self._im.items())))

    # -- formatting ---------------------------------------------------------

    def format(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [f"x{i + 1}" for i in range(self.n_vars)]
        parts = []
        for exps, c in self.terms():
            mono = "*".join(
                (names[i] if e == 1 else f"{names[i]}^{e}") for i, e in enumerate(exps) if e
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        body = " + ".join(parts) if parts else "0"
        return f"{body} + O({self.order + 1})"

    def __repr__(self):
        return f"TruncatedSeries(n_vars={self.n_vars}, order={self.order}, {self.format()})"

    __str__ = format

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "TruncatedSeries") -> None:
        if self.n_vars != other.n_vars:
            raise DimensionError(f"variable-count mismatch: {self.n_vars} vs {other.n_vars}")

    def _coerce(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return other
        return TruncatedSeries.constant(self.n_vars, self.order, other)

    def __add__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        order = min(self.order, o.order)
        limit = (order + 1) << self._shift
        re = {k: v for k, v in self._re.items() if k < limit}
        for k, v in o._re.items():
            if k < limit:
                re[k] = re.get(k, 0) + v
        im = {k: v for k, v in self._im.items() if k < limit}
        for k, v in o._im.items():
            if k < limit:
                im[k] = im.get(k, 0) + v
        return TruncatedSeries._make(self.n_vars, order, _clean(re), _clean(im))

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries._make(
            self.n_vars, self.order, {k: -v for k, v in self._re.items()}, {k: -v for k, v in self._im.items()}
        )

    def __sub__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c) -> "TruncatedSeries":
        c = GaussRational.coerce(c)
        a, b = c.re, c.im
        if not a and not b:
            return TruncatedSeries.zero(self.n_vars, self.order)
        re: dict = {}
        im: dict = {}
        if a:
            for k, v in self._re.items():
                re[k] = v * a
            for k, v in self._im.items():
                im[k] = v * a
        if b:
            for k, v in self._re.items():
                im[k] = im.get(k, 0) + v * b
            for k, v in self._im.items():
                re[k] = re.get(k, 0) - v * b
        return TruncatedSeries._make(self.n_vars, self.order, _clean(re), _clean(im))

    def _product_order(self, other: "TruncatedSeries") -> int:
        va, vb = self.valuation(), other.valuation()
        big = MAX_ORDER * 4
        order = min(
            self.order + (vb if vb is not None else big),
            other.order + (va if va is not None else big),
        )
        return min(order, max(self.order, other.order))

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        self._check(other)
        order = self._product_order(other)
        limit = (order + 1) << self._shift
        re: dict = {}
        im: dict = {}
        if other._re:
            items, keys = _sorted_items(other._re)
            _mul_dicts(self._re, items, keys, limit, re)
            _mul_dicts(self._im, items, keys, limit, im)
        if other._im:
            items, keys = _sorted_items(other._im)
            _mul_dicts(self._re, items, keys, limit, im)
            _mul_dicts(self._im, items, keys, limit, re, sign=-1)
        return TruncatedSeries._make(self.n_vars, order, _clean(re), _clean(im))

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = TruncatedSeries.one(self.n_vars, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def inverse(self) -> "TruncatedSeries":
        """Multiplicative inverse; needs a nonzero constant term."""
        c = self.constant_term()
        if not c:
            raise AnalyticDomainError("series with zero constant term has no inverse")
        w = self.scale(GaussRational(1) / c) - 1
        return apply_univariate(univariate_coefficients("geometric", self.order), w).scale(GaussRational(1) / c)

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            self._check(other)
            if other.constant_term():
                return self * other.inverse()
            return _exact_divide(self, other)
        return self.scale(GaussRational(1) / GaussRational.coerce(other))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    # -- calculus and variable manipulation ---------------------------------

    def partial(self, j: int) -> "TruncatedSeries":
        """Formal partial derivative in variable ``j`` (0-based).

        The certified order drops by one because a degree-``N`` jet only
        determines its derivative through degree ``N-1``.
        """
        if not 0 <= j < self.n_vars:
            raise IndexError(f"variable index {j} out of range for {self.n_vars} variables")
        pos = _BITS * j
        dec = (1 << pos) + (1 << self._shift)

        def diff(d):
            out = {}
            for k, v in d.items():
                e = (k >> pos) & _MASK
                if e:
                    out[k - dec] = v * e
            return out

        return TruncatedSeries._make(self.n_vars, max(self.order - 1, 0), diff(self._re), diff(self._im))

    def integrate(self, j: int) -> "TruncatedSeries":
        """Antiderivative in variable ``j`` with zero integration constant."""
        if not 0 <= j < self.n_vars:
            raise IndexError(f"variable index {j} out of range for {self.n_vars} variables")
        pos = _BITS * j
        inc = (1 << pos) + (1 << self._shift)
        order = min(self.order + 1, MAX_ORDER)

        def integ(d):
            return {k + inc: v / (((k >> pos) & _MASK) + 1) for k, v in d.items()}

        return TruncatedSeries._make(self.n_vars, order, integ(self._re), integ(self._im))

    def mul_monomial(self, exps: Sequence[int], coeff=1) -> "TruncatedSeries":
        """Multiply by ``coeff * x^exps``; the certified order rises by the monomial degree."""
        if len(exps) != self.n_vars:
            raise DimensionError("monomial has the wrong number of exponents")
        key = _pack(exps)
        order = min(self.order + sum(exps), MAX_ORDER)
        shifted = TruncatedSeries._make(
            self.n_vars,
            order,
            {k + key: v for k, v in self._re.items()},
            {k + key: v for k, v in self._im.items()},
        )
        return shifted.scale(coeff) if coeff != 1 else shifted

    def _map_keys(self, n_vars: int, order: int, fn: Callable[[tuple], tuple | None]) -> "TruncatedSeries":
        limit = (order + 1) << (_BITS * n_vars)
        re: dict = {}
        im: dict = {}
        for src, dst in ((self._re, re), (self._im, im)):
            for k, v in src.items():
                e = fn(_unpack(k, self.n_vars))
                if e is None:
                    continue
                nk = _pack(e)
                if nk < limit:
                    dst[nk] = dst.get(nk, 0) + v
        return TruncatedSeries._make(n_vars, order, _clean(re), _clean(im))

    def embed(self, n_vars: int, positions: Sequence[int], order: int | None = None) -> "TruncatedSeries":
        """Move variable ``i`` to slot ``positions[i]`` of an ``n_vars``-variable ring."""
        if len(positions) != self.n_vars:
            raise DimensionError("positions must name a slot for every variable")
        if len(set(positions)) != len(positions) or any(not 0 <= p < n_vars for p in positions):
            raise ValueError("positions must be distinct slots of the target ring")

        def move(e):
            out = [0] * n_vars
            for i, p in enumerate(positions):
                out[p] = e[i]
            return tuple(out)

        return self._map_keys(n_vars, self.order if order is None else min(order, self.order), move)

    def restrict(self, keep: Sequence[int]) -> "TruncatedSeries":
        """Set every variable not in ``keep`` to zero and drop it from the ring."""
        keep = list(keep)
        drop = [i for i in range(self.n_vars) if i not in keep]

        def proj(e):
            if any(e[i] for i in drop):
                return None
            return tuple(e[i] for i in keep)

        return self._map_keys(len(keep), self.order, proj)

    def subs_zero(self, variables: Iterable[int]) -> "TruncatedSeries":
        """Set the listed variables to zero, keeping the ring."""
        variables = list(variables)
        return self._map_keys(self.n_vars, self.order, lambda e: None if any(e[i] for i in variables) else e)

    def scale_vars(self, factors: Sequence) -> "TruncatedSeries":
        """Substitute ``x_j -> factors[j] * x_j``."""
        if len(factors) != self.n_vars:
            raise DimensionError("need one factor per variable")
        factors = [GaussRational.coerce(f) for f in factors]
        terms = {}
        for exps, c in self.terms():
            for f, e in zip(factors, exps):
                if e:
                    c = c * f**e
            terms[exps] = c
        return TruncatedSeries(self.n_vars, self.order, terms)

    def conjugate(self) -> "TruncatedSeries":
        return TruncatedSeries._make(self.n_vars, self.order, dict(self._re), {k: -v for k, v in self._im.items()})

    # -- evaluation ---------------------------------------------------------

    def eval_numeric(self, point: Sequence[complex]) -> complex:
        """Horner evaluation at a floating-point point.

        Exact coefficients are converted to floating point only when they
        enter the Horner accumulation.
        """
        if len(point) != self.n_vars:
            raise DimensionError(f"point has {len(point)} coordinates, series has {self.n_vars} variables")
        terms = [(e, complex(c)) for e, c in self.terms()]
        if not terms:
            return 0j
        return _horner(terms, [complex(p) for p in point], 0)

    def compiled(self):
        """Return ``(exponents, coefficients)`` numpy arrays for vectorised evaluation."""
        import numpy as np

        terms = self.terms()
        exps = np.array([e for e, _ in terms], dtype=np.int64).reshape(len(terms), self.n_vars)
        coeffs = np.array([complex(c) for _, c in terms], dtype=np.complex128)
        return exps, coeffs

    # -- export ---------------------------------------------------------------

    def to_records(self) -> list[dict]:
        return [
            {
                "exponents": list(e),
                "re": [int(c.re.numerator), int(c.re.denominator)],
                "im": [int(c.im.numerator), int(c.im.denominator)],
            }
            for e, c in self.terms()
        ]

    @classmethod
    def from_records(cls, n_vars: int, order: int, records: Iterable[Mapping]) -> "TruncatedSeries":
        terms = {}
        for rec in records:
            re = Fraction(*rec["re"])
            im = Fraction(*rec["im"])
            terms[tuple(rec["exponents"])] = GaussRational(re, im)
        return cls(n_vars, order, terms)


def _horner(terms: list, point: list, var: int) -> complex:
    if var == len(point):
        return sum(c for _, c in terms)
    groups: dict[int, list] = {}
    for e, c in terms:
        groups.setdefault(e[var], []).append((e, c))
    x = point[var]
    acc = 0j
    for p in range(max(groups), -1, -1):
        acc = acc * x
        if p in groups:
            acc += _horner(groups[p], point, var + 1)
    return acc


def _divide_homogeneous(p: dict, g: dict, n_vars: int) -> dict:
    """Exact quotient of homogeneous polynomials given as key -> GaussRational."""
    if not g:
        raise ZeroDivisionError("division by zero polynomial")
    lg = max(g)
    cg = g[lg]
    lg_digits = [(lg >> (_BITS * i)) & _MASK for i in range(n_vars)]
    quotient: dict = {}
    p = dict(p)
    while p:
        lp = max(p)
        for i in range(n_vars):
            if ((lp >> (_BITS * i)) & _MASK) < lg_digits[i]:
                raise AnalyticDomainError("denominator does not divide numerator exactly")
        qk = lp - lg
        qc = p[lp] / cg
        quotient[qk] = qc
        for k, c in g.items():
            nk = qk + k
            v = p.get(nk, GaussRational(0)) - qc * c
            if v:
                p[nk] = v
            else:
                p.pop(nk, None)
    return quotient


def _exact_divide(f: TruncatedSeries, g: TruncatedSeries) -> TruncatedSeries:
    """Quotient ``f / g`` when ``g`` has zero constant term and divides ``f`` exactly."""
    v = g.valuation()
    if v is None:
        raise ZeroDivisionError("division by the zero series")
    order = min(f.order, g.order) - v
    if order < 0:
        raise OrderBudgetError("no certified coefficients left after division")
    n = f.n_vars
    shift = _BITS * n
    g_lead = {
        k: GaussRational(g._re.get(k, 0), g._im.get(k, 0))
        for k in set(g._re) | set(g._im)
        if k >> shift == v
    }
    residual = f.truncate(order + v)
    quotient = TruncatedSeries.zero(n, order)
    for d in range(order + 1):
        part = residual.homogeneous_part(d + v)
        p = {k: GaussRational(part._re.get(k, 0), part._im.get(k, 0)) for k in set(part._re) | set(part._im)}
        if not p:
            continue
        qd = _divide_homogeneous(p, g_lead, n)
        q_series = TruncatedSeries._make(
            n,
            order,
            _clean({k: c.re for k, c in qd.items()}),
            _clean({k: c.im for k, c in qd.items()}),
        )
        quotient = quotient + q_series
        residual = residual - q_series * g
    if not residual.is_zero():
        raise AnalyticDomainError("denominator does not divide numerator exactly")
    return quotient


class SeriesVector(tuple):
    """Tuple of series sharing one ring."""

    def __new__(cls, components: Iterable[TruncatedSeries]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a SeriesVector needs at least one component")
        n = comps[0].n_vars
        for c in comps:
            if not isinstance(c, TruncatedSeries):
                raise TypeError("SeriesVector components must be TruncatedSeries")
            if c.n_vars != n:
                raise DimensionError("SeriesVector components must share n_vars")
        return super().__new__(cls, comps)

    @property
    def n_vars(self) -> int:
        return self[0].n_vars

    @property
    def order(self) -> int:
        return min(c.order for c in self)

    def truncate(self, order: int) -> "SeriesVector":
        return SeriesVector(c.truncate(order) for c in self)

    def agrees_with(self, other: Sequence[TruncatedSeries], order: int | None = None) -> bool:
        return len(self) == len(other) and all(a.agrees_with(b, order) for a, b in zip(self, other))

    @classmethod
    def identity(cls, n_vars: int, order: int) -> "SeriesVector":
        return cls(TruncatedSeries.variable(n_vars, order, j) for j in range(n_vars))


# -- composition ------------------------------------------------------------


def _is_plain_variable(s: TruncatedSeries) -> int | None:
    if s._im or len(s._re) != 1:
        return None
    ((k, v),) = s._re.items()
    if v != 1 or k >> (_BITS * s.n_vars) != 1:
        return None
    e = _unpack(k, s.n_vars)
    return e.index(1)


def compose(outer: TruncatedSeries, args: Sequence[TruncatedSeries], polynomial: bool = False) -> TruncatedSeries:
    """Substitute ``args[i]`` for variable ``i`` of ``outer``.

    Every argument substituted into a variable that ``outer`` actually uses
    must have zero constant term, because the unknown tail of ``outer``
    would otherwise feed into every degree.  Passing ``polynomial=True``
    declares ``outer`` to be an exact polynomial, which lifts that
    restriction.
    """
    if len(args) != outer.n_vars:
        raise DimensionError(f"outer has {outer.n_vars} variables but {len(args)} arguments were given")
    if not args:
        raise DimensionError("composition needs at least one argument")
    n = args[0].n_vars
    for a in args:
        if a.n_vars != n:
            raise DimensionError("all arguments must share one ring")

    used = [False] * outer.n_vars
    for e, _ in outer.terms():
        for i, x in enumerate(e):
            if x:
                used[i] = True
    if not polynomial:
        for i, a in enumerate(args):
            if used[i] and a.constant_term():
                raise CompositionDivergenceError(
                    f"argument {i} has nonzero constant term {a.constant_term()} but outer is an infinite series"
                )

    arg_order = min(a.order for a in args)
    target_order = arg_order if polynomial else min(arg_order, outer.order)

    plain = {i: _is_plain_variable(a) for i, a in enumerate(args)}
    general = [i for i in range(outer.n_vars) if plain[i] is None]

    groups: dict[tuple, dict] = {}
    for e, c in outer.terms():
        ge = tuple(e[i] for i in general)
        mono = [0] * n
        for i, x in enumerate(e):
            if x and plain[i] is not None:
                mono[plain[i]] += x
        if sum(mono) > target_order:
            continue
        groups.setdefault(ge, {})
        key = tuple(mono)
        groups[ge][key] = groups[ge].get(key, GaussRational(0)) + c

    cache: dict[tuple, TruncatedSeries] = {(0,) * len(general): TruncatedSeries.one(n, target_order)}

    def power_product(ge: tuple) -> TruncatedSeries:
        if ge in cache:
            return cache[ge]
        last = max(i for i, x in enumerate(ge) if x)
        prev = list(ge)
        prev[last] -= 1
        val = power_product(tuple(prev)) * args[general[last]]
        cache[ge] = val
        return val

    result = TruncatedSeries.zero(n, target_order)
    for ge in sorted(groups):
        coeff = TruncatedSeries(n, target_order, groups[ge])
        if coeff.is_zero():
            continue
        if not polynomial and sum(ge) > target_order and all(args[general[i]].valuation() for i, x in enumerate(ge) if x):
            continue
        result = result + power_product(ge) * coeff
    return result


# -- univariate generating data ---------------------------------------------


@lru_cache(maxsize=None)
def bernoulli(m: int) -> mpq:
    """Bernoulli number ``B_m`` (convention ``B_1 = -1/2``)."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return mpq(1)
    if m > 1 and m % 2:
        return mpq(0)
    total = mpq(0)
    for k in range(m):
        total += math.comb(m + 1, k) * bernoulli(k)
    return -total / (m + 1)


def _series_div(num: list, den: list, n: int) -> list:
    out = []
    for m in range(n + 1):
        acc = num[m] - sum(out[j] * den[m - j] for j in range(m))
        out.append(acc / den[0])
    return out


@lru_cache(maxsize=None)
def _univariate(kind: str, n: int, r: mpq | None = None) -> tuple:
    fact = [mpq(math.factorial(m)) for m in range(2 * n + 2)]
    if kind == "exp":
        return tuple(1 / fact[m] for m in range(n + 1))
    if kind == "log1p":
        return tuple(mpq(0) if m == 0 else mpq((-1) ** (m + 1), m) for m in range(n + 1))
    if kind == "sin":
        return tuple(mpq(0) if m % 2 == 0 else mpq((-1) ** (m // 2)) / fact[m] for m in range(n + 1))
    if kind == "cos":
        return tuple(mpq(0) if m % 2 else mpq((-1) ** (m // 2)) / fact[m] for m in range(n + 1))
    if kind == "sinh":
        return tuple(mpq(0) if m % 2 == 0 else 1 / fact[m] for m in range(n + 1))
    if kind == "cosh":
        return tuple(mpq(0) if m % 2 else 1 / fact[m] for m in range(n + 1))
    if kind == "tan":
        return tuple(_series_div(list(_univariate("sin", n)), list(_univariate("cos", n)), n))
    if kind == "tanh":
        return tuple(_series_div(list(_univariate("sinh", n)), list(_univariate("cosh", n)), n))
    if kind == "geometric":
        return tuple(mpq((-1) ** m) for m in range(n + 1))
    if kind == "binomial":
        out = [mpq(1)]
        for m in range(1, n + 1):
            out.append(out[-1] * (r - (m - 1)) / m)
        return tuple(out)
    if kind == "ucoth_sq":
        return tuple(mpq(4) ** m * bernoulli(2 * m) / fact[2 * m] for m in range(n + 1))
    if kind == "sinc_sq":  # sin(v)/v in w = v^2
        return tuple(mpq((-1) ** m) / fact[2 * m + 1] for m in range(n + 1))
    if kind == "cos_sq":  # cos(v) in w = v^2
        return tuple(mpq((-1) ** m) / fact[2 * m] for m in range(n + 1))
    raise ValueError(f"unknown univariate series {kind!r}")


def univariate_coefficients(kind: str, n: int, r=None) -> tuple:
    """Exact Maclaurin coefficients ``c_0..c_n`` of a named one-variable series."""
    return _univariate(kind, n, None if r is None else _q(r))


def apply_univariate(coeffs: Sequence, u: TruncatedSeries) -> TruncatedSeries:
    """Evaluate ``sum_m coeffs[m] * u^m`` by Horner's rule; ``u`` must vanish at 0."""
    if u.constant_term():
        raise AnalyticDomainError("argument must have zero constant term")
    v = u.valuation()
    if v is None:
        return TruncatedSeries.constant(u.n_vars, u.order, GaussRational.coerce(coeffs[0]) if coeffs else 0)
    top = min(len(coeffs) - 1, u.order // v)
    result = TruncatedSeries.constant(u.n_vars, u.order, coeffs[top])
    for m in range(top - 1, -1, -1):
        result = result * u + GaussRational.coerce(coeffs[m])
    return result


BUILTIN_FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "sinh", "cosh", "tan", "tanh", "ucoth_sq")


def analytic(kind: str, u: TruncatedSeries, r=None) -> TruncatedSeries:
    """Apply an analytic function to a series.

    ``kind`` is one of :data:`BUILTIN_FUNCTIONS` or ``"pow"`` (with the
    rational exponent ``r``).  ``exp``, the trigonometric and hyperbolic
    functions and ``ucoth_sq`` need ``u(0) = 0``; ``log``, ``sqrt`` and
    ``pow`` need ``u(0) = 1``.  ``ucoth_sq(w)`` is ``v*coth(v)`` written as a
    series in ``w = v**2``.
    """
    c0 = u.constant_term()
    if kind in ("exp", "sin", "cos", "sinh", "cosh", "tan", "tanh", "ucoth_sq"):
        if c0:
            raise AnalyticDomainError(f"{kind} needs an argument with zero constant term, got {c0}")
        return apply_univariate(univariate_coefficients(kind, u.order), u)
    if kind == "log":
        if c0 != 1:
            raise AnalyticDomainError(f"log needs an argument with constant term 1, got {c0}")
        return apply_univariate(univariate_coefficients("log1p", u.order), u - 1)
    if kind in ("sqrt", "pow"):
        r = mpq(1, 2) if kind == "sqrt" else _q(r)
        if r.denominator == 1 and c0:
            k = int(r)
            return u**k
        if c0 != 1:
            raise AnalyticDomainError(f"rational power needs an argument with constant term 1, got {c0}")
        return apply_univariate(univariate_coefficients("binomial", u.order, r), u - 1)
    raise ValueError(f"unknown analytic function {kind!r}")


def exp(u: TruncatedSeries) -> TruncatedSeries:
    return analytic("exp", u)


def log(u: TruncatedSeries) -> TruncatedSeries:
    return analytic("log", u)


def sqrt(u: TruncatedSeries) -> TruncatedSeries:
    return analytic("sqrt", u)


def pow_rational(u: TruncatedSeries, r) -> TruncatedSeries:
    return analytic("pow", u, r)


def ucoth_sq(w: TruncatedSeries) -> TruncatedSeries:
    return analytic("ucoth_sq", w)


# -- formal maps --------------------------------------------------------------


def invert_formal_map(f: Sequence[TruncatedSeries]) -> SeriesVector:
    """Compositional inverse of a map tangent to the identity.

    Uses the fixed point ``g <- id - (f o g - g)``; each pass fixes one more
    degree, so pass ``d`` runs at truncation ``d`` only.
    """
    f = SeriesVector(f)
    n = f.n_vars
    if len(f) != n:
        raise DimensionError("an invertible formal map needs as many components as variables")
    order = f.order
    ident = SeriesVector.identity(n, order)
    for i, fi in enumerate(f):
        if fi.constant_term():
            raise NotInvertibleError(f"component {i} has nonzero constant term")
        if not fi.truncate(min(1, order)).agrees_with(ident[i].truncate(min(1, order))):
            raise NotInvertibleError(f"linear part of component {i} is not the identity")
    g = list(SeriesVector.identity(n, min(1, order)))
    for d in range(2, order + 1):
        fd = [c.truncate(d) for c in f]
        gd = [TruncatedSeries(n, d, c.as_dict()) for c in g]
        idd = SeriesVector.identity(n, d)
        g = [gi - (compose(fi, gd) - idd[i]) for i, (fi, gi) in enumerate(zip(fd, gd))]
        g = [gi + TruncatedSeries.zero(n, d) for gi in g]
    return SeriesVector(TruncatedSeries(n, order, gi.as_dict()) for gi in g)


def rasevskii_norm(f: TruncatedSeries, eps) -> mpq:
    """Squared norm ``max_s eps^(-2|s|) |f_s|^2`` of the countable norm family.

    The square keeps the value rational even for genuinely complex
    coefficients.
    """
    eps = _q(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    inv2 = 1 / (eps * eps)
    best = mpq(0)
    for e, c in f.terms():
        val = c.abs2() * inv2 ** sum(e)
        if val > best:
            best = val
    return best
