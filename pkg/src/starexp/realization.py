"""Realizations of a Lie algebra by formal differential operators.

A realization is the pair ``(C, phi)``: structure constants ``C^k_ij`` and an
``n x n`` grid of power series in the derivative variables ``d1..dn`` such
that the generators

    xhat_j = sum_a x_a * phi[a][j](d)

obey ``[xhat_i, xhat_j] = sum_k C^k_ij xhat_k``.  Row ``a`` of the grid is the
coordinate index and column ``j`` the generator index.  All indices in this
module are 0-based; spec files use 1-based indices.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from gmpy2 import mpq

from .fps import (
    GaussRational,
    I,
    TruncatedSeries,
    apply_univariate,
    pow_rational,
    univariate_coefficients,
)

__all__ = [
    "RealizationError",
    "StructureConstants",
    "Realization",
    "PhiReport",
    "levi_civita",
    "validate_phi_system",
    "builtin_realization",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("abelian", "su2_fl", "su2_sym")


class RealizationError(ValueError):
    """Inconsistent realization data (bad constants, bad grid, unknown builtin)."""


def levi_civita(a: int, b: int, c: int) -> int:
    """Sign of the permutation ``(a, b, c)`` of ``(0, 1, 2)``; zero on repeats."""
    if len({a, b, c}) < 3:
        return 0
    return 1 if (a, b, c) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1


@dataclass(frozen=True)
class StructureConstants:
    """Antisymmetric structure constants ``C^k_ij`` stored for ``i < j`` only."""

    n: int
    entries: Mapping[tuple[int, int, int], GaussRational] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j, k), v in self.entries.items():
            if not (0 <= i < j < self.n and 0 <= k < self.n):
                raise RealizationError(f"structure constant index ({i}, {j}, {k}) must satisfy i < j < n")
            v = GaussRational.coerce(v)
            if v:
                clean[(i, j, k)] = v
        object.__setattr__(self, "entries", clean)

    def __call__(self, i: int, j: int, k: int) -> GaussRational:
        if i == j:
            return GaussRational(0)
        if i < j:
            return self.entries.get((i, j, k), GaussRational(0))
        return -self.entries.get((j, i, k), GaussRational(0))

    @classmethod
    def zero(cls, n: int) -> "StructureConstants":
        return cls(n, {})

    @classmethod
    def su2(cls, coefficient) -> "StructureConstants":
        """``C^c_ab = coefficient * eps_abc``."""
        c = GaussRational.coerce(coefficient)
        entries = {}
        for a, b in ((0, 1), (0, 2), (1, 2)):
            for k in range(3):
                e = levi_civita(a, b, k)
                if e:
                    entries[(a, b, k)] = c * e
        return cls(3, entries)

    def jacobi_violations(self) -> list[tuple[int, int, int, int]]:
        n = self.n
        bad = []
        for i, j, k, l in product(range(n), repeat=4):
            total = GaussRational(0)
            for m in range(n):
                total = (
                    total
                    + self(i, j, m) * self(m, k, l)
                    + self(j, k, m) * self(m, i, l)
                    + self(k, i, m) * self(m, j, l)
                )
            if total:
                bad.append((i, j, k, l))
        return bad

    def is_zero(self) -> bool:
        return not self.entries


@dataclass(frozen=True)
class Realization:
    """Structure constants plus the realization grid ``phi[a][j]``.

    Attributes
    ----------
    name : str
    n : int
    constants : StructureConstants
    kappa : GaussRational
        Deformation parameter the grid was built with.
    phi : tuple of tuples of TruncatedSeries
        ``phi[a][j]`` in ``n`` derivative variables; row = coordinate.
    order : int
        Truncation order the grid was built at.
    source : str, optional
        Spec-file text this realization was loaded from, if any.
    """

    name: str
    n: int
    constants: StructureConstants
    kappa: GaussRational
    phi: tuple
    order: int
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        phi = tuple(tuple(row) for row in self.phi)
        object.__setattr__(self, "phi", phi)
        if len(phi) != self.n or any(len(row) != self.n for row in phi):
            raise RealizationError(f"phi must be a {self.n}x{self.n} grid")
        if self.constants.n != self.n:
            raise RealizationError("structure constants have the wrong dimension")
        for a in range(self.n):
            for j in range(self.n):
                s = phi[a][j]
                if s.n_vars != self.n:
                    raise RealizationError(f"phi[{a}][{j}] must be a series in {self.n} variables")
                want = 1 if a == j else 0
                if s.constant_term() != want:
                    raise RealizationError(
                        f"phi(0) is not the identity: entry ({a + 1}, {j + 1}) has constant term {s.constant_term()}"
                    )
        object.__setattr__(self, "kappa", GaussRational.coerce(self.kappa))

    def entry(self, a: int, j: int) -> TruncatedSeries:
        return self.phi[a][j]

    def truncate(self, order: int) -> "Realization":
        return Realization(
            self.name,
            self.n,
            self.constants,
            self.kappa,
            tuple(tuple(s.truncate(order) for s in row) for row in self.phi),
            order,
            self.source,
        )

    def with_phi(self, a: int, j: int, series: TruncatedSeries, name: str | None = None) -> "Realization":
        """Copy with one grid entry replaced; used to build perturbed variants."""
        rows = [list(row) for row in self.phi]
        rows[a][j] = series
        return Realization(name or self.name + "_modified", self.n, self.constants, self.kappa, rows, self.order)

    def with_constants(self, constants: StructureConstants, name: str | None = None) -> "Realization":
        return Realization(name or self.name + "_modified", self.n, constants, self.kappa, self.phi, self.order)

    def digest(self) -> str:
        """Short content hash of constants and grid, stable across runs."""
        payload = {
            "n": self.n,
            "C": sorted(
                [list(k), str(v.re), str(v.im)] for k, v in self.constants.entries.items()
            ),
            "phi": [[s.to_records() for s in row] for row in self.phi],
            "order": self.order,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class PhiReport:
    """Outcome of :func:`validate_phi_system`.

    ``violations`` lists ``(i, j, k, exponents, coefficient)`` with the
    lowest-degree nonzero residual term for each failing triple.
    """

    passed: bool
    order: int
    violations: list = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return f"phi system holds through order {self.order}"
        i, j, k, e, c = self.violations[0]
        return (
            f"phi system fails for {len(self.violations)} triple(s); first (i,j,k)=({i + 1},{j + 1},{k + 1}) "
            f"residual term {c} at exponent {list(e)}"
        )


def _leading_term(s: TruncatedSeries):
    terms = s.terms()
    return terms[0] if terms else None


def validate_phi_system(r: Realization) -> PhiReport:
    """Check the first-order PDE system equivalent to the commutation relations.

    For all ``i < j`` and every ``k`` the residual

        sum_l phi[l][j] d_l phi[k][i] - phi[l][i] d_l phi[k][j] - sum_s C^s_ij phi[k][s]

    must vanish, where ``d_l`` differentiates with respect to the ``l``-th
    derivative variable.  The check is exact through order ``r.order - 1``.
    """
    n = r.n
    phi = r.phi
    partials = [[[phi[k][i].partial(l) for l in range(n)] for i in range(n)] for k in range(n)]
    violations = []
    cert = r.order
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                res = TruncatedSeries.zero(n, r.order)
                for l in range(n):
                    res = res + phi[l][j] * partials[k][i][l] - phi[l][i] * partials[k][j][l]
                for s in range(n):
                    c = r.constants(i, j, s)
                    if c:
                        res = res - phi[k][s].scale(c)
                cert = min(cert, res.order)
                lead = _leading_term(res)
                if lead is not None:
                    violations.append((i, j, k, lead[0], lead[1]))
    return PhiReport(not violations, cert, violations)


# -- builtins -----------------------------------------------------------------


def _sum_of_squares(n: int, order: int) -> TruncatedSeries:
    total = TruncatedSeries.zero(n, order)
    for c in range(n):
        v = TruncatedSeries.variable(n, order, c)
        total = total + v * v
    return total


def _su2_fl_phi(kappa: mpq, order: int) -> list:
    n = 3
    d = [TruncatedSeries.variable(n, order, c) for c in range(n)]
    root = pow_rational(1 + _sum_of_squares(n, order).scale(kappa * kappa), Fraction(1, 2))
    rows = []
    for b in range(n):
        row = []
        for a in range(n):
            entry = root if a == b else TruncatedSeries.zero(n, order)
            for c in range(n):
                e = levi_civita(a, b, c)
                if e:
                    entry = entry + d[c].scale(I * kappa * e)
            row.append(entry)
        rows.append(row)
    return rows


def _su2_sym_phi(kappa: mpq, order: int) -> list:
    # The grid entry reads
    #   delta_ai U - d_a d_i V - (i kappa/2) eps_iak d_k
    # with U = ucoth_sq(kappa^2 d.d/4), i.e. (|p|/2) cot(|p|/2) in the real
    # momentum p = -i kappa d, and V = (U - 1)/(d.d).  V is expanded directly
    # as a series in s = d.d so that no division is needed.
    n = 3
    d = [TruncatedSeries.variable(n, order, c) for c in range(n)]
    s = _sum_of_squares(n, order)
    c = univariate_coefficients("ucoth_sq", order + 1)
    t = kappa * kappa / 4
    u_coeffs = [c[m] * t**m for m in range(order + 1)]
    v_coeffs = [c[m + 1] * t ** (m + 1) for m in range(order)]
    U = apply_univariate(u_coeffs, s)
    V = apply_univariate(v_coeffs, s) if order >= 2 else TruncatedSeries.zero(n, order)
    rows = []
    for a in range(n):
        row = []
        for i in range(n):
            entry = U if a == i else TruncatedSeries.zero(n, order)
            entry = entry - d[a] * d[i] * V
            for k in range(n):
                e = levi_civita(i, a, k)
                if e:
                    entry = entry + d[k].scale(GaussRational(0, -kappa * e / 2))
            row.append(entry)
        rows.append(row)
    return rows


def builtin_realization(name: str, order: int = 8, kappa=1, n: int = 3) -> Realization:
    """Return one of the compiled-in realizations.

    Parameters
    ----------
    name : {"abelian", "su2_fl", "su2_sym"}
    order : int
        Truncation order of the grid (at least 2).
    kappa : rational
        Deformation parameter; ignored for ``abelian``.
    n : int
        Dimension, used only by ``abelian``.

    Notes
    -----
    ``su2_fl`` uses ``phi[b][a] = delta_ab sqrt(1 + kappa^2 d.d) + i kappa eps_abc d_c``,
    which realizes ``[xhat_a, xhat_b] = -2 i kappa eps_abc xhat_c``.
    ``su2_sym`` is the symmetric ordering for ``[xhat_a, xhat_b] = i kappa eps_abc xhat_c``.
    """
    if order < 2:
        raise RealizationError("builtin realizations need order >= 2")
    k = GaussRational.coerce(Fraction(kappa) if not isinstance(kappa, (str, GaussRational)) else kappa)
    if not k.is_real():
        raise RealizationError("kappa must be real")
    kq = k.re
    if name == "abelian":
        phi = [[TruncatedSeries.constant(n, order, 1 if a == j else 0) for j in range(n)] for a in range(n)]
        return Realization("abelian", n, StructureConstants.zero(n), GaussRational(0), phi, order)
    if name == "su2_fl":
        return Realization("su2_fl", 3, StructureConstants.su2(I * (-2 * kq)), k, _su2_fl_phi(kq, order), order)
    if name == "su2_sym":
        return Realization("su2_sym", 3, StructureConstants.su2(I * kq), k, _su2_sym_phi(kq, order), order)
    raise RealizationError(f"unknown builtin realization {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
