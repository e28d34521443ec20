"""Expression language for realization spec files.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' exponent)?        exponent folds to a rational
    atom   := number | 'i' | ident | 'd'<int> | func '(' expr ')' | '(' expr ')'

Numbers are exact decimals (``0.25`` means 1/4).  ``^`` binds tighter than
unary minus, so ``-d1^2`` is ``-(d1^2)``, and associates to the right.
Identifiers other than ``i``, ``d<j>`` and builtin function names are
parameters, bound at evaluation time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .fps import (
    BUILTIN_FUNCTIONS,
    AnalyticDomainError,
    GaussRational,
    I,
    OrderBudgetError,
    SeriesError,
    TruncatedSeries,
    analytic,
)
from .realization import (
    Realization,
    RealizationError,
    StructureConstants,
)

__all__ = [
    "ParseError",
    "EvalError",
    "SpecFileError",
    "Token",
    "Num",
    "Imag",
    "Param",
    "Var",
    "BinOp",
    "Neg",
    "Call",
    "Pow",
    "tokenize",
    "parse_expression",
    "to_source",
    "eval_expr_to_series",
    "eval_constant",
    "RealizationSpec",
    "parse_spec_file",
    "load_realization_spec",
]


class ParseError(ValueError):
    """Syntax error with the byte offset and the set of tokens that would have fit."""

    def __init__(self, message: str, pos: int, expected: Sequence[str] = ()):
        self.pos = pos
        self.expected = tuple(expected)
        extra = f"; expected {' or '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at offset {pos}{extra}")


class EvalError(ValueError):
    """Evaluation failure pointing at the offending subexpression."""

    def __init__(self, message: str, pos: int):
        self.pos = pos
        super().__init__(f"{message} (subexpression at offset {pos})")


class SpecFileError(ValueError):
    """Malformed realization spec file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# -- tokens ---------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, op, lparen, rparen, comma, eof
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d*)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(source)))
    return tokens


# -- syntax tree ----------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Fraction
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Imag:
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: Fraction
    pos: int = field(default=0, compare=False)


_VAR_RE = re.compile(r"d([1-9]\d*)$")


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.pos, [what])
        return self.advance()

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else f"token {t.text!r}"

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.pos, ["operator", "end of input"])
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            t = self.advance()
            node = BinOp(t.text, node, self.term(), t.pos)
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            t = self.advance()
            right = self.unary()
            if t.text == "/" and isinstance(node, Num) and isinstance(right, Num) and right.value:
                # literal p/q is a rational literal
                node = Num(node.value / right.value, node.pos)
            else:
                node = BinOp(t.text, node, right, t.pos)
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            t = self.advance()
            return Neg(self.unary(), t.pos)
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            t = self.advance()
            exp_start = self.tok.pos
            # right-associative: the exponent may itself be a power
            exponent_node = self.unary()
            try:
                value = eval_constant(exponent_node, {})
            except (EvalError, ZeroDivisionError):
                raise ParseError("exponent must be a rational constant", exp_start, ["rational exponent"]) from None
            if value.im:
                raise ParseError("exponent must be real", exp_start, ["rational exponent"])
            return Pow(base, Fraction(int(value.re.numerator), int(value.re.denominator)), t.pos)
        return base

    def atom(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Num(Fraction(t.text), t.pos)
        if t.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", "')'")
            return node
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "lparen":
                if t.text not in BUILTIN_FUNCTIONS:
                    raise ParseError(f"unknown function {t.text!r}", t.pos, sorted(BUILTIN_FUNCTIONS))
                self.advance()
                args = [self.expr()]
                while self.tok.kind == "comma":
                    self.advance()
                    args.append(self.expr())
                self.expect("rparen", "')'")
                if len(args) != 1:
                    raise ParseError(f"{t.text} takes exactly one argument", t.pos)
                return Call(t.text, tuple(args), t.pos)
            if t.text == "i":
                return Imag(t.pos)
            m = _VAR_RE.match(t.text)
            if m:
                return Var(int(m.group(1)), t.pos)
            if t.text in BUILTIN_FUNCTIONS:
                raise ParseError(f"function {t.text!r} needs an argument list", self.tok.pos, ["'('"])
            return Param(t.text, t.pos)
        raise ParseError(f"unexpected {self._describe(t)}", t.pos, ["expression"])


def parse_expression(source: str):
    """Parse one expression; raises :class:`ParseError` with a byte offset."""
    return _Parser(source).parse()


def _fraction_source(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"({f.numerator}/{f.denominator})"


def to_source(node) -> str:
    """Fully parenthesised source text that parses back to an equal tree."""
    if isinstance(node, Num):
        return _fraction_source(node.value)
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Var):
        return f"d{node.index}"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Pow):
        return f"({to_source(node.base)})^{_fraction_source(node.exponent)}"
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation -----------------------------------------------------------------


def eval_constant(node, params: Mapping[str, object]) -> GaussRational:
    """Evaluate an expression that must not mention any derivative variable."""
    if isinstance(node, Num):
        return GaussRational(node.value)
    if isinstance(node, Imag):
        return I
    if isinstance(node, Param):
        if node.name not in params:
            raise EvalError(f"unbound parameter {node.name!r}", node.pos)
        return GaussRational.coerce(params[node.name])
    if isinstance(node, Var):
        raise EvalError(f"variable d{node.index} is not allowed in a constant", node.pos)
    if isinstance(node, Neg):
        return -eval_constant(node.operand, params)
    if isinstance(node, BinOp):
        a = eval_constant(node.left, params)
        b = eval_constant(node.right, params)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if not b:
            raise EvalError("division by zero", node.pos)
        return a / b
    if isinstance(node, Pow):
        base = eval_constant(node.base, params)
        if node.exponent.denominator != 1:
            if base == 1:
                return base
            raise EvalError("non-integer power of a constant other than 1", node.pos)
        if not base and node.exponent < 0:
            raise EvalError("division by zero", node.pos)
        return base ** int(node.exponent)
    if isinstance(node, Call):
        s = TruncatedSeries.constant(0, 0, eval_constant(node.args[0], params))
        try:
            return _apply_call(node, s).constant_term()
        except AnalyticDomainError as exc:
            raise EvalError(str(exc), node.pos) from None
    raise TypeError(f"not an expression node: {node!r}")


def _apply_call(node: Call, arg: TruncatedSeries) -> TruncatedSeries:
    return analytic(node.name, arg)


def _eval(node, n: int, order: int, params: Mapping[str, GaussRational]) -> TruncatedSeries:
    if isinstance(node, (Num, Imag, Param)):
        return TruncatedSeries.constant(n, order, eval_constant(node, params))
    if isinstance(node, Var):
        if not 1 <= node.index <= n:
            raise EvalError(f"variable d{node.index} is outside the ring of {n} variables", node.pos)
        return TruncatedSeries.variable(n, order, node.index - 1)
    if isinstance(node, Neg):
        return -_eval(node.operand, n, order, params)
    if isinstance(node, BinOp):
        a = _eval(node.left, n, order, params)
        b = _eval(node.right, n, order, params)
        try:
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            return a / b
        except (SeriesError, ZeroDivisionError) as exc:
            raise EvalError(str(exc), node.pos) from None
    if isinstance(node, Pow):
        base = _eval(node.base, n, order, params)
        try:
            if node.exponent.denominator == 1:
                return base ** int(node.exponent)
            return analytic("pow", base, node.exponent)
        except (SeriesError, ZeroDivisionError) as exc:
            raise EvalError(str(exc), node.pos) from None
    if isinstance(node, Call):
        arg = _eval(node.args[0], n, order, params)
        try:
            return _apply_call(node, arg)
        except SeriesError as exc:
            raise EvalError(str(exc), node.pos) from None
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr_to_series(node, n_vars: int, order: int, params: Mapping[str, object] | None = None) -> TruncatedSeries:
    """Evaluate an expression tree as a series in ``d1..d{n_vars}`` through ``order``.

    Division by a series without constant term costs certified order, so the
    evaluation runs with a few spare degrees and is truncated at the end.
    """
    if isinstance(node, str):
        node = parse_expression(node)
    bound = {k: GaussRational.coerce(v) for k, v in (params or {}).items()}
    for spare in (2, 6, 12):
        s = _eval(node, n_vars, min(order + spare, 250), bound)
        if s.order >= order:
            return s.truncate(order)
    raise OrderBudgetError(f"expression loses too much order to certify degree {order}")


# -- spec files -----------------------------------------------------------------


@dataclass
class RealizationSpec:
    """Parsed but not yet evaluated spec file (1-based indices as written)."""

    n: int
    kappa: Fraction
    params: dict
    structure: dict  # (i, j, k) -> expression node
    phi: dict  # (a, j) -> expression node
    name: str = "custom"


_LINE_PATTERNS = [
    ("dim", re.compile(r"dim\s*=\s*(?P<value>\S+)$")),
    ("kappa", re.compile(r"kappa\s*=\s*(?P<value>.+)$")),
    ("name", re.compile(r"name\s*=\s*(?P<value>[A-Za-z_][A-Za-z_0-9]*)$")),
    ("param", re.compile(r"param\s+(?P<pname>[A-Za-z_][A-Za-z_0-9]*)\s*=\s*(?P<value>.+)$")),
    ("C", re.compile(r"C\s+(?P<i>\d+)\s+(?P<j>\d+)\s+(?P<k>\d+)\s*=\s*(?P<value>.+)$")),
    ("phi", re.compile(r"phi\s+(?P<a>\d+)\s+(?P<j>\d+)\s*=\s*(?P<value>.+)$")),
]


def _rational(text: str, line: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise SpecFileError(f"expected a rational number, got {text.strip()!r}", line) from None


def parse_spec_file(text: str) -> RealizationSpec:
    n = None
    kappa = Fraction(1)
    name = "custom"
    params: dict = {}
    structure: dict = {}
    phi: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for kind, pat in _LINE_PATTERNS:
            m = pat.match(line)
            if m:
                break
        else:
            raise SpecFileError(f"unrecognised line {line!r}", lineno)
        value = m.group("value")
        if kind == "dim":
            if n is not None:
                raise SpecFileError("dim given twice", lineno)
            if not value.isdigit() or int(value) < 1:
                raise SpecFileError("dim must be a positive integer", lineno)
            n = int(value)
        elif kind == "kappa":
            kappa = _rational(value, lineno)
        elif kind == "name":
            name = value
        elif kind == "param":
            pname = m.group("pname")
            if pname in ("i", "kappa") or _VAR_RE.match(pname) or pname in BUILTIN_FUNCTIONS:
                raise SpecFileError(f"parameter name {pname!r} is reserved", lineno)
            params[pname] = _rational(value, lineno)
        else:
            if n is None:
                raise SpecFileError("dim must come before C and phi entries", lineno)
            try:
                node = parse_expression(value)
            except ParseError as exc:
                raise SpecFileError(f"in expression: {exc}", lineno) from None
            if kind == "C":
                key = tuple(int(m.group(x)) for x in "ijk")
                if not all(1 <= x <= n for x in key):
                    raise SpecFileError(f"index out of range 1..{n}", lineno)
                if key in structure:
                    raise SpecFileError(f"C {' '.join(map(str, key))} given twice", lineno)
                if key[0] == key[1]:
                    raise SpecFileError("C i i k must be zero and may not be listed", lineno)
                structure[key] = node
            else:
                key = (int(m.group("a")), int(m.group("j")))
                if not all(1 <= x <= n for x in key):
                    raise SpecFileError(f"index out of range 1..{n}", lineno)
                if key in phi:
                    raise SpecFileError(f"phi {key[0]} {key[1]} given twice", lineno)
                phi[key] = node
    if n is None:
        raise SpecFileError("missing dim line")
    return RealizationSpec(n, kappa, params, structure, phi, name)


def load_realization_spec(text: str, order: int = 8, kappa=None) -> Realization:
    """Parse and evaluate a spec file into a :class:`Realization`.

    Parameters
    ----------
    text : str
        Spec file contents.
    order : int
        Truncation order for the grid.
    kappa : rational, optional
        Overrides the file's ``kappa`` line.
    """
    spec = parse_spec_file(text)
    n = spec.n
    k = spec.kappa if kappa is None else Fraction(kappa)
    params = {"kappa": GaussRational(k), **{p: GaussRational(v) for p, v in spec.params.items()}}

    values: dict = {}
    for (i, j, kk), node in spec.structure.items():
        try:
            values[(i, j, kk)] = eval_constant(node, params)
        except EvalError as exc:
            raise SpecFileError(f"C {i} {j} {kk}: {exc}") from None
    entries = {}
    for (i, j, kk), v in values.items():
        if i < j:
            other = values.get((j, i, kk))
            if other is not None and other != -v:
                raise SpecFileError(f"C {i} {j} {kk} and C {j} {i} {kk} are not antisymmetric")
            entries[(i - 1, j - 1, kk - 1)] = v
        elif (j, i, kk) not in values:
            entries[(j - 1, i - 1, kk - 1)] = -v
    constants = StructureConstants(n, entries)
    bad = constants.jacobi_violations()
    if bad:
        i, j, kk, l = bad[0]
        raise SpecFileError(f"structure constants violate the Jacobi identity at (i,j,k,l)=({i + 1},{j + 1},{kk + 1},{l + 1})")

    grid = []
    for a in range(1, n + 1):
        row = []
        for j in range(1, n + 1):
            node = spec.phi.get((a, j))
            if node is None:
                row.append(TruncatedSeries.constant(n, order, 1 if a == j else 0))
                continue
            try:
                row.append(eval_expr_to_series(node, n, order, params))
            except (EvalError, SeriesError) as exc:
                raise SpecFileError(f"phi {a} {j}: {exc}") from None
        grid.append(row)
    try:
        return Realization(spec.name, n, constants, GaussRational(k), grid, order, source=text)
    except RealizationError as exc:
        raise SpecFileError(str(exc)) from None
