"""``starexp`` command line.

Exit status: 0 success, 1 a validation check failed, 2 bad usage or input,
3 the computation could not be carried out (order budget, analytic domain,
numeric precision).  Diagnostics go to stderr as one line.

With ``--format records`` every subcommand writes JSON lines: one header
object (``"record": "header"``) followed by one object per coefficient or
sample.  :func:`read_records` turns such output back into series.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from importlib import resources
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import __version__
from .expr import EvalError, ParseError, SpecFileError, load_realization_spec
from .fps import GaussRational, SeriesError, TruncatedSeries, pow_rational
from .kcalc import coproduct_momenta, d_series, k_series_formal_solution, k_series_lambda_one, k_series_realization
from .numeric import BranchError, OdeProblem, PrecisionError, cross_check, fl_P, k_ode_integrate, sym_D
from .realization import RealizationError, builtin_realization, validate_phi_system
from .weyl import check_lie_homomorphism

BUILTINS = ("abelian", "su2_fl", "su2_sym")


class UsageError(Exception):
    pass


# -- records --------------------------------------------------------------------------


def series_records(components: Sequence[TruncatedSeries]) -> list[dict]:
    out = []
    for idx, s in enumerate(components):
        for rec in s.to_records():
            out.append({"record": "term", "component": idx + 1, **rec})
    return out


def read_records(lines: Iterable[str]) -> tuple[dict, list[TruncatedSeries]]:
    """Parse records output back into ``(header, components)``."""
    header = None
    terms: dict[int, list] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec.get("record") == "header":
            header = rec
        elif rec.get("record") == "term":
            terms.setdefault(rec["component"], []).append(rec)
    if header is None:
        raise ValueError("no header record")
    n_vars = len(header["variables"])
    comps = [
        TruncatedSeries.from_records(n_vars, header["order"], terms.get(i + 1, []))
        for i in range(header["components"])
    ]
    return header, comps


def _emit(out: TextIO, fmt: str, header: dict, components: Sequence[TruncatedSeries], labels: Sequence[str]) -> None:
    names = list(header["variables"])
    if fmt == "records":
        header = {"record": "header", "version": __version__, "components": len(components), **header}
        out.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in series_records(components):
            out.write(json.dumps(rec, sort_keys=True) + "\n")
        return
    meta = ", ".join(f"{k}={header[k]}" for k in sorted(header) if k not in ("variables", "kind"))
    out.write(f"# {header['kind']} ({meta})\n")
    for label, s in zip(labels, components):
        out.write(f"{label} = {s.format(names)}\n")


# -- argument handling ----------------------------------------------------------------


def _rational_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational number, got {text!r}") from None


def _vector_arg(text: str) -> list[float]:
    # exact decimals first, then float
    try:
        return [float(Fraction(part.strip())) for part in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated decimals, got {text!r}") from None


def _order_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"order must be an integer, got {text!r}") from None
    if value < 2:
        raise argparse.ArgumentTypeError("order must be at least 2")
    return value


def _common(p: argparse.ArgumentParser, source: bool = True) -> None:
    if source:
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--spec", help="realization spec file")
        g.add_argument("--builtin", choices=BUILTINS, help="compiled-in realization")
    p.add_argument("--order", type=_order_arg, default=8, help="truncation order (>= 2, default 8)")
    p.add_argument("--kappa", type=_rational_arg, default=None, help="deformation parameter (rational)")
    p.add_argument("--format", choices=("table", "records"), default="table")
    p.add_argument("--out", help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starexp", description="Exact star exponentials from Lie algebra realizations.")
    parser.add_argument("--version", action="version", version=f"starexp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the phi system and the commutation relations")
    _common(p)

    p = sub.add_parser("kseries", help="K(k, q) with exp(i k.xhat) exp(i q.x) = exp(i K.x)")
    _common(p)

    p = sub.add_parser("dseries", help="star-product exponent D(k, q)")
    _common(p)

    p = sub.add_parser("coproduct", help="coproduct of the momenta d_j")
    _common(p)
    p.add_argument("--component", type=int, default=None, help="1-based j; default all")

    p = sub.add_parser("ode", help="integrate the characteristic system with RK4")
    _common(p)
    p.add_argument("--k", type=_vector_arg, required=True)
    p.add_argument("--q", type=_vector_arg, required=True)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--lambda-end", type=float, default=1.0)

    p = sub.add_parser("crosscheck", help="compare ODE, closed form and series at random samples")
    _common(p)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=0.1, help="max |component| of k and q")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--tolerance", type=float, default=1e-6)

    p = sub.add_parser("example-dl", help="K for F = d^l from the A sequence against its closed form")
    _common(p, source=False)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--quote-paper", action="store_true", help="print the closed form next to the values")

    p = sub.add_parser("export", help="write a realization as an editable spec file")
    _common(p)
    return parser


def _load(args) -> "object":
    if args.builtin:
        kappa = 1 if args.kappa is None else args.kappa
        return builtin_realization(args.builtin, order=args.order, kappa=kappa)
    try:
        with open(args.spec, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read spec file: {exc}") from None
    return load_realization_spec(text, order=args.order, kappa=args.kappa)


def _meta(r, order: int) -> dict:
    return {"realization": r.name, "digest": r.digest(), "kappa": str(r.kappa), "order": order}


# -- subcommands ----------------------------------------------------------------------


def cmd_validate(args, out) -> int:
    r = _load(args)
    phi = validate_phi_system(r)
    hom = check_lie_homomorphism(r)
    passed = phi.passed and hom.passed
    if args.format == "records":
        rec = {"record": "header", "version": __version__, "kind": "validate", **_meta(r, args.order)}
        out.write(json.dumps(rec, sort_keys=True) + "\n")
        out.write(json.dumps({"record": "check", "check": "phi_system", "passed": phi.passed, "summary": phi.summary()}, sort_keys=True) + "\n")
        out.write(json.dumps({"record": "check", "check": "lie_homomorphism", "passed": hom.passed, "summary": hom.summary()}, sort_keys=True) + "\n")
    else:
        out.write(f"# validate {r.name} (kappa={r.kappa}, order={args.order})\n")
        out.write(f"phi system:       {'ok' if phi.passed else 'FAILED'}  {phi.summary()}\n")
        out.write(f"lie homomorphism: {'ok' if hom.passed else 'FAILED'}  {hom.summary()}\n")
    return 0 if passed else 1


def cmd_kseries(args, out) -> int:
    r = _load(args)
    K = k_series_realization(r, args.order)
    header = {"kind": "kseries", **_meta(r, args.order), "variables": list(K.variables)}
    _emit(out, args.format, header, K.components, [f"K{a + 1}" for a in range(K.n)])
    return 0


def cmd_dseries(args, out) -> int:
    r = _load(args)
    D = d_series(r, args.order)
    header = {"kind": "dseries", **_meta(r, args.order), "variables": list(D.variables)}
    _emit(out, args.format, header, D.components, [f"D{a + 1}" for a in range(D.n)])
    return 0


def cmd_coproduct(args, out) -> int:
    r = _load(args)
    n = r.n
    if args.component is not None and not 1 <= args.component <= n:
        raise UsageError(f"--component must be in 1..{n}")
    js = range(n) if args.component is None else [args.component - 1]
    d = d_series(r, args.order)
    cps = [coproduct_momenta(r, j, args.order, d) for j in js]
    names = [f"u{a + 1}" for a in range(n)] + [f"v{a + 1}" for a in range(n)]
    header = {
        "kind": "coproduct",
        **_meta(r, args.order),
        "variables": names,
        "primitive": [c.is_primitive() for c in cps],
        "dictionary": "u = d (x) 1, v = 1 (x) d",
    }
    _emit(out, args.format, header, [c.series for c in cps], [f"Delta(d{j + 1})" for j in js])
    return 0


def _closed_form(r, k: np.ndarray, q: np.ndarray, lam: float):
    kappa = float(r.kappa.re)
    if r.name == "abelian":
        return q + lam * k
    if r.name == "su2_fl":
        return fl_P(k, q, kappa, lam)
    if r.name == "su2_sym" and kappa != 0 and lam == 1.0:
        return sym_D(k, q, kappa)
    return None


def cmd_ode(args, out) -> int:
    r = _load(args)
    if len(args.k) != r.n or len(args.q) != r.n:
        raise UsageError(f"--k and --q need {r.n} components")
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    k = np.array([args.k])
    q = np.array([args.q])
    res = k_ode_integrate(OdeProblem.from_realization(r, k, q, args.steps, args.lambda_end))
    value = np.atleast_2d(res.value)[0]
    closed = _closed_form(r, k, q, args.lambda_end)
    closed = None if closed is None else np.atleast_2d(closed)[0]
    dev = None if closed is None else float(np.max(np.abs(value - closed)))
    if args.format == "records":
        rec = {"record": "header", "version": __version__, "kind": "ode", **_meta(r, args.order), "steps": args.steps, "lambda_end": repr(args.lambda_end)}
        out.write(json.dumps(rec, sort_keys=True) + "\n")
        row = {
            "record": "sample",
            "k": [repr(x) for x in k[0]],
            "q": [repr(x) for x in q[0]],
            "ode": [repr(float(x)) for x in value],
            "closed": None if closed is None else [repr(float(x)) for x in closed],
            "deviation": None if dev is None else repr(dev),
            "tail": repr(res.tail_bound),
        }
        out.write(json.dumps(row, sort_keys=True) + "\n")
    else:
        out.write(f"# ode {r.name} (kappa={r.kappa}, order={args.order}, steps={args.steps}, lambda={args.lambda_end})\n")
        out.write("ode    = [" + ", ".join(f"{x:.15g}" for x in value) + "]\n")
        if closed is not None:
            out.write("closed = [" + ", ".join(f"{x:.15g}" for x in closed) + "]\n")
            out.write(f"max deviation {dev:.3e}\n")
        out.write(f"series tail bound {res.tail_bound:.3e}\n")
    return 0


def cmd_crosscheck(args, out) -> int:
    r = _load(args)
    rng = np.random.default_rng(args.seed)
    n = r.n
    samples = [(rng.uniform(-args.radius, args.radius, n), rng.uniform(-args.radius, args.radius, n)) for _ in range(args.samples)]
    report = cross_check(r, samples, tolerance=args.tolerance, steps=args.steps)
    if args.format == "records":
        rec = {"record": "header", "version": __version__, "kind": "crosscheck", **_meta(r, args.order), "passed": report.passed, "tolerance": repr(args.tolerance)}
        out.write(json.dumps(rec, sort_keys=True) + "\n")
        for row in report.records():
            out.write(json.dumps({"record": "sample", **{k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()}}, sort_keys=True) + "\n")
    else:
        out.write(report.table() + "\n")
    return 0 if report.passed else 1


def dl_closed_form_jet(l: int, order: int) -> TruncatedSeries:
    """Jet of ``k / (1 - (l-1) k^(l-1))^(1/(l-1))`` for ``l >= 2``."""
    k = TruncatedSeries.variable(1, order, 0)
    base = 1 - (k ** (l - 1)).scale(l - 1)
    return k * pow_rational(base, Fraction(-1, l - 1))


def cmd_example_dl(args, out) -> int:
    l = args.l
    if l < 0:
        raise UsageError("--l must be non-negative")
    order = args.order
    if l >= 2:
        F = [TruncatedSeries.variable(1, order, 0) ** l]
        computed = k_series_lambda_one(F, order)[0]
        expected = dl_closed_form_jet(l, order)
        names = ["k"]
        quote = f"K = k/(1 - {l - 1}*k^{l - 1})^(1/{l - 1}) at lam = 1"
    else:
        # lam stays formal: the sum at lam = 1 is not a power series in k
        F = [TruncatedSeries.variable(1, order, 0) ** l]
        computed = k_series_formal_solution(F, order).components[0]
        q = TruncatedSeries.variable(2, order, 0)
        lam = TruncatedSeries.variable(2, order, 1)
        from .fps import exp

        expected = q + lam if l == 0 else q * exp(lam)
        names = ["k", "lam"]
        quote = "K = k + lam" if l == 0 else "K = k*exp(lam)"
    match = computed == expected
    if args.format == "records":
        header = {"kind": "example-dl", "l": l, "order": order, "variables": names, "match": match}
        _emit(out, "records", header, [computed, expected], [])
    else:
        out.write(f"# F = d^{l}, order {order}\n")
        out.write(f"A-sequence  : {computed.format(names)}\n")
        out.write(f"closed form : {expected.format(names)}\n")
        if args.quote_paper:
            out.write(f"cited       : {quote}\n")
        out.write("match\n" if match else "MISMATCH\n")
    return 0 if match else 1


def cmd_export(args, out) -> int:
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
    else:
        text = resources.files("starexp").joinpath("specs", f"{args.builtin}.spec").read_text(encoding="utf-8")
    if args.kappa is not None:
        lines = text.splitlines()
        lines = [f"kappa = {args.kappa}" if line.strip().startswith("kappa") and "=" in line else line for line in lines]
        text = "\n".join(lines) + "\n"
    # make sure what we write loads
    load_realization_spec(text, order=args.order)
    out.write(text)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "kseries": cmd_kseries,
    "dseries": cmd_dseries,
    "coproduct": cmd_coproduct,
    "ode": cmd_ode,
    "crosscheck": cmd_crosscheck,
    "example-dl": cmd_example_dl,
    "export": cmd_export,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, SpecFileError, ParseError, RealizationError) as exc:
        print(f"starexp: error: {exc}", file=sys.stderr)
        return 2
    except (SeriesError, EvalError, PrecisionError, BranchError, ArithmeticError) as exc:
        print(f"starexp: computation error: {exc}", file=sys.stderr)
        return 3
    finally:
        if args.out:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
