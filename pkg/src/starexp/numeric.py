"""Floating-point cross-checks for the exact series.

Three independent routes to ``K(k, q)`` are compared here: classical RK4 on
the characteristic system ``dP/dlam = F(P)``, ``P(0) = q``, the su(2) closed
forms, and Horner evaluation of the exact jets.  Everything is vectorised
over a batch of sample points with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .fps import GaussRational, TruncatedSeries, apply_univariate, pow_rational, univariate_coefficients
from .kcalc import flow_matrix
from .realization import Realization

__all__ = [
    "PrecisionError",
    "BranchError",
    "CompiledSeries",
    "OdeProblem",
    "OdeResult",
    "step_halving_ratio",
    "k_ode_integrate",
    "fl_P",
    "fl_conserved",
    "fl_D_paper",
    "fl_D_symmetric_variant",
    "sym_D",
    "sym_D_relations",
    "su2_closed_forms",
    "fl_P_jet",
    "fl_D_jet",
    "fl_D_term_report",
    "CrossCheckReport",
    "cross_check",
]


class PrecisionError(ArithmeticError):
    """The truncation tail of the flow exceeds the requested tolerance."""


class BranchError(ValueError):
    """A closed form was evaluated outside its principal branch."""


# -- compiled series ------------------------------------------------------------------


class CompiledSeries:
    """A batch of series evaluated together at many points.

    The monomials of all series are deduplicated into one basis, so an
    evaluation is a table of powers, one product per variable and a single
    matrix product with the coefficient matrix.
    """

    def __init__(self, series: Sequence[TruncatedSeries]):
        self.n_vars = series[0].n_vars
        self.count = len(series)
        self.orders = [s.order for s in series]
        self.degree_data = []
        index: dict[tuple, int] = {}
        entries = []
        for idx, s in enumerate(series):
            degs, mags = [], []
            for e, c in s.terms():
                row = index.setdefault(e, len(index))
                entries.append((row, idx, complex(c)))
                degs.append(sum(e))
                mags.append(abs(complex(c)))
            self.degree_data.append((np.array(degs, dtype=np.int64), np.array(mags)))
        self.exps = np.array(list(index), dtype=np.int64).reshape(len(index), self.n_vars)
        matrix = np.zeros((len(index), self.count), dtype=np.complex128)
        for row, idx, c in entries:
            matrix[row, idx] += c
        self.real = not np.any(matrix.imag)
        self.matrix = matrix.real.copy() if self.real else matrix
        self.max_exp = int(self.exps.max()) if self.exps.size else 0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape ``(S, n_vars)``; returns ``(S, count)``."""
        pts = np.asarray(points)
        dtype = np.float64 if self.real and not np.iscomplexobj(pts) else np.complex128
        pts = pts.astype(dtype, copy=False)
        S = pts.shape[0]
        powers = np.empty((self.max_exp + 1, self.n_vars, S), dtype=dtype)
        powers[0] = 1
        for p in range(1, self.max_exp + 1):
            powers[p] = powers[p - 1] * pts.T
        mono = powers[self.exps[:, 0], 0]
        for v in range(1, self.n_vars):
            mono = mono * powers[self.exps[:, v], v]
        return (self.matrix.T @ mono).T

    def tail_bound(self, radius: float) -> float:
        """Geometric estimate of the truncated tail on the polydisc of ``radius``.

        Uses the two highest nonzero homogeneous degrees of every series:
        their ratio gives a per-degree growth rate ``rho`` and the unseen tail
        is bounded by ``a_top * rho / (1 - rho)``.  Returns ``inf`` when
        ``rho >= 1``.
        """
        worst = 0.0
        for (deg, mag), order in zip(self.degree_data, self.orders):
            if not len(mag):
                continue
            sizes = {}
            for d, m in zip(deg, mag):
                sizes[int(d)] = sizes.get(int(d), 0.0) + m * radius ** int(d)
            nz = sorted(d for d, v in sizes.items() if v > 0)
            if len(nz) < 2:
                continue
            d1, d2 = nz[-2], nz[-1]
            a1, a2 = sizes[d1], sizes[d2]
            rho = (a2 / a1) ** (1.0 / (d2 - d1))
            # The degrees between the top computed one and the order are known
            # to vanish, so the tail starts after ``order``.
            if rho >= 1:
                return math.inf
            worst = max(worst, a2 * rho ** (order + 1 - d2) / (1 - rho))
        return worst


# -- ODE ------------------------------------------------------------------------------


@dataclass
class OdeProblem:
    """Characteristic system ``dP/dlam = flow(P, k)``, ``P(0) = q``.

    ``k`` and ``q`` may be single vectors or batches of shape ``(S, n)``.
    """

    n: int
    flow: Callable[[np.ndarray, np.ndarray], np.ndarray]
    k: np.ndarray
    q: np.ndarray
    steps: int = 10_000
    lambda_end: float = 1.0
    series_order: int | None = None
    tail: Callable[[float], float] | None = field(default=None, repr=False)
    kappa: float = 0.0
    batched: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        self.batched = np.ndim(self.k) == 2 or np.ndim(self.q) == 2
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if self.k.shape[1] != self.n or self.q.shape[1] != self.n:
            raise ValueError(f"k and q need {self.n} components")

    @classmethod
    def from_realization(cls, r: Realization, k, q, steps: int = 10_000, lambda_end: float = 1.0) -> "OdeProblem":
        """Flow ``dP_a/dlam = sum_j k_j psi_aj(P)`` from the realization grid."""
        n = r.n
        psi = flow_matrix(r)
        compiled = CompiledSeries([psi[a][j] for a in range(n) for j in range(n)])

        def flow(P, K):
            vals = compiled(P).reshape(P.shape[0], n, n)
            return np.einsum("saj,sj->sa", vals, K).real

        return cls(n, flow, k, q, steps, lambda_end, r.order, compiled.tail_bound, float(r.kappa.re))

    @classmethod
    def from_series(cls, F: Sequence[TruncatedSeries], q, steps: int = 10_000, lambda_end: float = 1.0) -> "OdeProblem":
        """Generic flow ``dP/dlam = F(P)`` with ``F`` given as series."""
        n = len(F)
        compiled = CompiledSeries(list(F))

        def flow(P, K):
            return compiled(P).real

        q = np.asarray(q, dtype=float)
        return cls(n, flow, np.zeros_like(q), q, steps, lambda_end, min(f.order for f in F), compiled.tail_bound)


@dataclass
class OdeResult:
    value: np.ndarray
    tail_bound: float
    steps: int


def k_ode_integrate(p: OdeProblem, tolerance: float | None = None) -> OdeResult:
    """Fixed-step classical RK4 from ``lam = 0`` to ``p.lambda_end``.

    The flow is a truncated series, so a tail bound is attached: the flow
    error on the visited region times the integration length.  With a
    ``tolerance`` given, a larger bound raises :class:`PrecisionError`.
    """
    h = p.lambda_end / p.steps
    P = np.broadcast_to(p.q, np.broadcast_shapes(p.q.shape, p.k.shape)).astype(float).copy()
    K = np.broadcast_to(p.k, P.shape)
    f = p.flow
    radius = float(np.abs(P).max(initial=0.0))
    for _ in range(p.steps):
        k1 = f(P, K)
        k2 = f(P + 0.5 * h * k1, K)
        k3 = f(P + 0.5 * h * k2, K)
        k4 = f(P + h * k3, K)
        P = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        radius = max(radius, float(np.abs(P).max(initial=0.0)))
    tail = 0.0
    if p.tail is not None:
        kscale = float(np.abs(K).sum(axis=1).max(initial=1.0)) if np.any(K) else 1.0
        tail = p.tail(radius) * kscale * abs(p.lambda_end)
    if tolerance is not None and tail > tolerance:
        raise PrecisionError(f"truncation tail {tail:.3g} exceeds tolerance {tolerance:.3g}; raise the order or shrink inputs")
    value = P if p.batched else P[0]
    return OdeResult(value, tail, p.steps)


def step_halving_ratio(p: OdeProblem, coarse: int = 4) -> float:
    """Self-convergence ratio ``|y_N - y_2N| / |y_2N - y_4N|`` with ``N = coarse``.

    Classical RK4 gives a ratio near 16; the comparison is between runs of
    the same problem, so truncation of the flow series does not enter.
    """
    vals = []
    for steps in (coarse, 2 * coarse, 4 * coarse):
        q = OdeProblem(p.n, p.flow, p.k, p.q, steps, p.lambda_end)
        q.batched = True
        vals.append(k_ode_integrate(q).value)
    num = float(np.max(np.abs(vals[0] - vals[1])))
    den = float(np.max(np.abs(vals[1] - vals[2])))
    return math.inf if den == 0 else num / den


# -- su(2) closed forms ---------------------------------------------------------------


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def _sqrt_checked(x: np.ndarray, what: str) -> np.ndarray:
    if np.any(x < 0):
        raise BranchError(f"{what} is negative ({np.min(x):.3g}); outside the principal branch")
    return np.sqrt(x)


def fl_P(k, q, kappa: float, mu: float = 1.0) -> np.ndarray:
    """Solution of ``dP/dmu = k sqrt(1 - kappa^2 P^2) + kappa k x P``, ``P(0) = q``.

    ``P = k sqrt(1 - kappa^2 q^2) sin(t)/(kappa|k|) + q cos(t) + (k x q) sin(t)/|k|``
    with ``t = kappa |k| mu``; the ``sin(t)/|k|`` factors are evaluated with
    ``np.sinc`` so ``k = 0`` and ``kappa = 0`` are regular.
    """
    k, q = _vec(k), _vec(q)
    kn = _norm(k)[..., None]
    theta = kappa * kn * mu
    sinc = np.sinc(theta / np.pi)  # sin(theta)/theta
    root = _sqrt_checked(1 - kappa**2 * np.sum(q * q, axis=-1), "1 - kappa^2 q^2")[..., None]
    return k * root * mu * sinc + q * np.cos(theta) + np.cross(k, q) * kappa * mu * sinc


def fl_conserved(k, q, kappa: float, mu: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the conserved relation along the su(2) flow.

    Returns ``sqrt(1 - kappa^2 P^2)`` and
    ``sqrt(1 - kappa^2 q^2) cos(t) - kappa (q.k/|k|) sin(t)`` with
    ``t = kappa |k| mu`` and ``P = fl_P(k, q, kappa, mu)``.
    """
    k, q = _vec(k), _vec(q)
    P = fl_P(k, q, kappa, mu)
    lhs = _sqrt_checked(1 - kappa**2 * np.sum(P * P, axis=-1), "1 - kappa^2 P^2")
    kn = _norm(k)
    theta = kappa * kn * mu
    rq = _sqrt_checked(1 - kappa**2 * np.sum(q * q, axis=-1), "1 - kappa^2 q^2")
    # (q.k/|k|) sin(t) = (q.k) kappa mu sinc(t)
    rhs = rq * np.cos(theta) - kappa * np.sum(q * k, axis=-1) * kappa * mu * np.sinc(theta / np.pi)
    return lhs, rhs


def fl_D_paper(k, q, kappa: float) -> np.ndarray:
    """``sqrt(1 - kappa^2 k^2) k + sqrt(1 - kappa^2 k^2) q - kappa k x q``."""
    k, q = _vec(k), _vec(q)
    rk = _sqrt_checked(1 - kappa**2 * np.sum(k * k, axis=-1), "1 - kappa^2 k^2")[..., None]
    return rk * k + rk * q - kappa * np.cross(k, q)


def fl_D_symmetric_variant(k, q, kappa: float) -> np.ndarray:
    """``sqrt(1 - kappa^2 q^2) k + sqrt(1 - kappa^2 k^2) q + kappa k x q``."""
    k, q = _vec(k), _vec(q)
    rk = _sqrt_checked(1 - kappa**2 * np.sum(k * k, axis=-1), "1 - kappa^2 k^2")[..., None]
    rq = _sqrt_checked(1 - kappa**2 * np.sum(q * q, axis=-1), "1 - kappa^2 q^2")[..., None]
    return rq * k + rk * q + kappa * np.cross(k, q)


def sym_D_relations(k, q, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Group-law relations for the symmetric su(2) ordering.

    With half angles ``a = kappa|k|/2`` and ``b = kappa|q|/2`` returns
    ``cos(phi) = cos a cos b - (k^.q^) sin a sin b`` and
    ``s = k^ sin a cos b + q^ cos a sin b - (k^ x q^) sin a sin b`` where
    ``exp(i k.xhat) exp(i q.xhat) = cos(phi) + i (s.sigma)`` and
    ``s = D^ sin(phi)``.  Unit vectors are handled through ``np.sinc``.
    """
    k, q = _vec(k), _vec(q)
    a = kappa * _norm(k) / 2
    b = kappa * _norm(q) / 2
    # k^ sin a = k * (kappa/2) * sin(a)/a
    ks = k * (kappa / 2) * np.sinc(a / np.pi)[..., None]
    qs = q * (kappa / 2) * np.sinc(b / np.pi)[..., None]
    cos_phi = np.cos(a) * np.cos(b) - np.sum(ks * qs, axis=-1)
    s = ks * np.cos(b)[..., None] + qs * np.cos(a)[..., None] - np.cross(ks, qs)
    return cos_phi, s


def sym_D(k, q, kappa: float) -> np.ndarray:
    """``D(k, q)`` for the symmetric ordering from :func:`sym_D_relations`."""
    cos_phi, s = sym_D_relations(k, q, kappa)
    if np.any(np.abs(cos_phi) > 1 + 1e-12):
        raise BranchError("|cos(phi)| exceeds 1")
    phi = np.arccos(np.clip(cos_phi, -1.0, 1.0))
    if np.any((np.sin(phi) < 1e-12) & (phi > 1.0)):
        raise BranchError("sin(phi) vanishes away from the origin")
    # D = (2/kappa) phi s / sin(phi) = (2/kappa) s / sinc(phi/pi)
    return (2.0 / kappa) * s / np.sinc(phi / np.pi)[..., None]


def su2_closed_forms(which: str, k, q, kappa: float, mu: float = 1.0):
    """Dispatch to the named closed form."""
    if which == "fl_P":
        return fl_P(k, q, kappa, mu)
    if which == "fl_D_paper":
        return fl_D_paper(k, q, kappa)
    if which == "fl_D_symmetric_variant":
        return fl_D_symmetric_variant(k, q, kappa)
    if which == "sym_D":
        return sym_D(k, q, kappa)
    if which == "sym_D_relations":
        return sym_D_relations(k, q, kappa)
    raise ValueError(f"unknown closed form {which!r}")


# -- exact jets of the closed forms ---------------------------------------------------


def _ring_vectors(order: int):
    n = 6
    k = [TruncatedSeries.variable(n, order, i) for i in range(3)]
    q = [TruncatedSeries.variable(n, order, 3 + i) for i in range(3)]
    return k, q


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def _root(u, kappa):
    # sqrt(1 - kappa^2 u)
    return pow_rational(1 - u.scale(kappa * kappa), Fraction(1, 2))


def fl_P_jet(kappa, order: int) -> list[TruncatedSeries]:
    """Exact Taylor jet of :func:`fl_P` at ``mu = 1`` in the ring ``(k, q)``.

    ``sin(t)/t`` and ``cos(t)`` are even in ``t = kappa |k|`` and are expanded
    as series in ``t^2 = kappa^2 k.k``.
    """
    kappa = GaussRational.coerce(kappa).re
    k, q = _ring_vectors(order)
    w = _dot(k, k).scale(kappa * kappa)
    S = apply_univariate(univariate_coefficients("sinc_sq", order), w)
    C = apply_univariate(univariate_coefficients("cos_sq", order), w)
    root = _root(_dot(q, q), kappa)
    kq = _cross(k, q)
    return [k[a] * root * S + q[a] * C + kq[a] * S.scale(kappa) for a in range(3)]


def fl_D_jet(variant: str, kappa, order: int) -> list[TruncatedSeries]:
    """Exact jet of ``fl_D_paper`` (``variant="paper"``) or ``fl_D_symmetric_variant``."""
    kappa = GaussRational.coerce(kappa).re
    k, q = _ring_vectors(order)
    rk = _root(_dot(k, k), kappa)
    rq = _root(_dot(q, q), kappa)
    kq = _cross(k, q)
    if variant == "paper":
        return [rk * k[a] + rk * q[a] - kq[a].scale(kappa) for a in range(3)]
    if variant == "symmetric_variant":
        return [rq * k[a] + rk * q[a] + kq[a].scale(kappa) for a in range(3)]
    raise ValueError(f"unknown variant {variant!r}")


def _bidegree_part(s: TruncatedSeries, keep) -> TruncatedSeries:
    terms = {e: c for e, c in s.terms() if keep(sum(e[:3]), sum(e[3:]))}
    return TruncatedSeries(s.n_vars, s.order, terms)


# (label, selector on (k-degree, q-degree)) for the three summands of the
# closed forms; their supports are disjoint.
_FL_D_TERMS = (
    ("sqrt-factor * k", lambda dk, dq: dq == 0),
    ("sqrt-factor * q", lambda dk, dq: dq == 1 and dk % 2 == 0),
    ("cross term k x q", lambda dk, dq: dq == 1 and dk == 1),
    ("remaining terms", lambda dk, dq: dq >= 2 or (dq == 1 and dk % 2 == 1 and dk > 1)),
)


def fl_D_term_report(D: Sequence[TruncatedSeries], kappa, order: int | None = None) -> dict:
    """Compare an exact ``D`` jet with both closed-form jets summand by summand.

    ``D`` lives in the ring ``(k1, k2, k3, q1, q2, q3)``.  The summands of
    the closed forms have disjoint supports in (k-degree, q-degree), so each
    one can be checked on its own.  Returns
    ``{variant: {"match": bool, "terms": {label: bool}}}``.
    """
    order = min(c.order for c in D) if order is None else order
    out = {}
    for variant in ("paper", "symmetric_variant"):
        jet = fl_D_jet(variant, kappa, order)
        terms = {}
        for label, keep in _FL_D_TERMS:
            terms[label] = all(
                _bidegree_part(d.truncate(order), keep) == _bidegree_part(j, keep) for d, j in zip(D, jet)
            )
        out[variant] = {"match": all(d.truncate(order) == j for d, j in zip(D, jet)), "terms": terms}
    return out


# -- cross check ----------------------------------------------------------------------


@dataclass
class CrossCheckReport:
    """Per-sample comparison of ODE, closed form and series jet."""

    realization: str
    rows: list
    tolerance: float
    passed: bool

    def table(self) -> str:
        head = f"{'sample':>6}  {'|ode-closed|':>12}  {'|ode-series|':>12}  {'|closed-series|':>15}  {'tail':>9}  ok"
        lines = [f"cross-check for {self.realization} (tolerance {self.tolerance:g})", head]
        for row in self.rows:
            def fmt(x):
                return f"{x:.3e}" if x is not None else "-"
            lines.append(
                f"{row['sample']:>6}  {fmt(row['ode_vs_closed']):>12}  {fmt(row['ode_vs_series']):>12}  "
                f"{fmt(row['closed_vs_series']):>15}  {row['tail']:9.2e}  {'yes' if row['ok'] else 'NO'}"
            )
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            rec = {k: v for k, v in row.items()}
            for key in ("k", "q", "ode", "closed", "series"):
                if rec.get(key) is not None:
                    rec[key] = [repr(float(x)) for x in rec[key]]
            out.append(rec)
        return out


def _closed_form_K(r: Realization, k: np.ndarray, q: np.ndarray) -> np.ndarray | None:
    kappa = float(r.kappa.re)
    if r.name == "abelian":
        return k + q
    if r.name == "su2_fl":
        return fl_P(k, q, kappa, 1.0)
    if r.name == "su2_sym" and kappa != 0:
        # K0 is the identity in the symmetric ordering, so K = D
        return sym_D(k, q, kappa)
    return None


def cross_check(
    r: Realization,
    samples: Sequence[tuple[Sequence[float], Sequence[float]]],
    tolerance: float = 1e-6,
    steps: int = 10_000,
    series_order: int | None = None,
) -> CrossCheckReport:
    """Compare the three routes to ``K(k, q)`` at each sample."""
    from .kcalc import k_series_realization

    order = r.order if series_order is None else series_order
    k = np.array([s[0] for s in samples], dtype=float)
    q = np.array([s[1] for s in samples], dtype=float)
    ode = k_ode_integrate(OdeProblem.from_realization(r, k, q, steps))
    closed = _closed_form_K(r, k, q)
    K = k_series_realization(r, order)
    series = CompiledSeries(list(K.components))(np.hstack([k, q])).real
    rows = []
    ok_all = True
    for idx in range(len(samples)):
        dev = {
            "ode_vs_series": float(np.max(np.abs(ode.value[idx] - series[idx]))),
            "ode_vs_closed": float(np.max(np.abs(ode.value[idx] - closed[idx]))) if closed is not None else None,
            "closed_vs_series": float(np.max(np.abs(closed[idx] - series[idx]))) if closed is not None else None,
        }
        ok = all(v is None or v <= tolerance for v in dev.values())
        ok_all &= ok
        rows.append(
            {
                "sample": idx,
                "k": k[idx],
                "q": q[idx],
                "ode": ode.value[idx],
                "closed": closed[idx] if closed is not None else None,
                "series": series[idx],
                **dev,
                "tail": ode.tail_bound,
                "ok": ok,
            }
        )
    return CrossCheckReport(r.name, rows, tolerance, ok_all)
