"""Recursive-descent parser for expressions, problem files and chart files.

Expression grammar (loosest first)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := postfix (('^' | '**') unary)?      # right associative
    postfix := atom "'"*
    atom    := number | name | name '(' args ')' | '(' sum ')'

``x'`` and ``diff(x, t, 2)`` become the jet variables ``x_1`` and ``x_2``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import expr as E
from .expr import Expr
from .jet import OdeSystem, VectorField, jet_name, split_jet


@dataclass(frozen=True)
class SourceSpan:
    offset: int
    end: int
    line: int
    col: int

    def __str__(self):
        return f"line {self.line}, col {self.col}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan, expected=()):
        self.message = message
        self.span = span
        self.expected = tuple(sorted(set(expected)))
        extra = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{span}: {message}{extra}")


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<deriv>d/d[A-Za-z][A-Za-z0-9_]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^()',;=\[\]{}.:])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, deriv, nl, eof
    text: str
    span: SourceSpan


def _span(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(start, end, line, col)


def tokenize(text: str, derivs: bool = False) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", _span(text, pos, pos + 1))
        kind = m.lastgroup
        if kind == "deriv" and not derivs:
            # re-lex as a plain name so 'd/dx' means d divided by dx
            m = re.compile(r"[A-Za-z][A-Za-z0-9_]*").match(text, pos)
            kind = "name"
        if kind != "ws":
            out.append(Token(kind, m.group(0), _span(text, m.start(), m.end())))
        pos = m.end()
    out.append(Token("eof", "", _span(text, len(text), len(text))))
    return out


# ---------------------------------------------------------------------------
# parser core


class _Parser:
    def __init__(self, text: str, derivs: bool = False, names=None, newline_ends=False):
        self.text = text
        self.toks = tokenize(text, derivs)
        self.i = 0
        self.names = names  # None means any name is allowed
        self.newline_ends = newline_ends

    # token helpers
    def peek(self, skip_nl=True) -> Token:
        j = self.i
        while skip_nl and self.toks[j].kind == "nl":
            j += 1
        return self.toks[j]

    def skip_nl(self):
        while self.toks[self.i].kind == "nl":
            self.i += 1

    def next(self, skip_nl=True) -> Token:
        if skip_nl:
            self.skip_nl()
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str, kind: str = "op") -> bool:
        t = self.peek(not self.newline_ends)
        return t.kind == kind and t.text == text

    def accept(self, text: str, kind: str = "op"):
        if self.at(text, kind):
            return self.next(not self.newline_ends)
        return None

    def expect(self, text: str, kind: str = "op") -> Token:
        t = self.peek(not self.newline_ends)
        if t.kind != kind or t.text != text:
            self.fail(t, f"unexpected {self._desc(t)}", [repr(text)])
        return self.next(not self.newline_ends)

    def expect_kind(self, kind: str, what: str) -> Token:
        t = self.peek(not self.newline_ends)
        if t.kind != kind:
            self.fail(t, f"unexpected {self._desc(t)}", [what])
        return self.next(not self.newline_ends)

    @staticmethod
    def _desc(t: Token) -> str:
        return "end of input" if t.kind == "eof" else ("end of line" if t.kind == "nl" else repr(t.text))

    def fail(self, t: Token, msg: str, expected=()):
        raise ParseError(msg, t.span, expected)

    # expressions
    def sum(self) -> Expr:
        left = self.product()
        while True:
            if self.accept("+"):
                left = E.add(left, self.product())
            elif self.accept("-"):
                left = E.add(left, E.neg(self.product()))
            else:
                return left

    def product(self) -> Expr:
        left = self.unary()
        while True:
            if self.accept("*"):
                left = E.mul(left, self.unary())
            elif self.at("/"):
                t = self.next(not self.newline_ends)
                right = self.unary()
                if E.is_const(right, 0):
                    self.fail(t, "division by zero")
                left = E.mul(left, E.power(right, E.MINUS_ONE))
            else:
                return left

    def unary(self) -> Expr:
        if self.accept("-"):
            return E.neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.postfix()
        t = self.peek(not self.newline_ends)
        if t.kind == "op" and t.text in ("^", "**"):
            self.next(not self.newline_ends)
            exponent = self.unary()
            try:
                return E.power(base, exponent)
            except E.DomainError as exc:
                self.fail(t, str(exc))
        return base

    def postfix(self) -> Expr:
        start = self.peek(not self.newline_ends)
        node = self.atom()
        while self.peek(False).kind == "op" and self.peek(False).text == "'":
            t = self.next(False)
            if not isinstance(node, E.Var):
                self.fail(t, "a prime must follow a variable name")
            dep, k = split_jet(node.name)
            node = E.Var(jet_name(dep, k + 1))
            self._check_name(node.name, start)
        return node

    def _check_name(self, name: str, tok: Token):
        if self.names is not None and name not in self.names:
            self.fail(tok, f"unknown variable {name!r}")

    def atom(self) -> Expr:
        t = self.peek(not self.newline_ends)
        if t.kind == "num":
            self.next(not self.newline_ends)
            return E.Const(Fraction(t.text))
        if t.kind == "deriv":
            self.next(not self.newline_ends)
            return E.Var(_DERIV_PREFIX + t.text[3:])
        if t.kind == "name":
            self.next(not self.newline_ends)
            if self.at("("):
                return self.call(t)
            self._check_name(t.text, t)
            return E.Var(t.text)
        if self.accept("("):
            inner = self.sum()
            self.expect(")")
            return inner
        self.fail(t, f"unexpected {self._desc(t)}", ["number", "name", "'('", "'-'"])

    def call(self, name: Token) -> Expr:
        self.expect("(")
        if name.text == "diff":
            dep = self.expect_kind("name", "dependent name")
            self.expect(",")
            self.expect_kind("name", "independent name")
            k = 1
            if self.accept(","):
                kt = self.expect_kind("num", "derivative order")
                if "." in kt.text or int(kt.text) < 1:
                    self.fail(kt, "derivative order must be a positive integer")
                k = int(kt.text)
            self.expect(")")
            d0, k0 = split_jet(dep.text)
            v = jet_name(d0, k0 + k)
            self._check_name(v, dep)
            return E.Var(v)
        if name.text not in E.FUNCTIONS:
            self.fail(name, f"unknown function {name.text!r}", E.FUNCTIONS)
        arg = self.sum()
        self.expect(")")
        try:
            return E.func(name.text, arg)
        except E.DomainError as exc:
            self.fail(name, str(exc))

    def end_of_statement(self):
        t = self.peek(False)
        if t.kind in ("nl", "eof") or (t.kind == "op" and t.text in (";", "}")):
            if t.kind == "nl" or t.text == ";":
                self.next(False)
            return
        self.fail(t, f"unexpected {self._desc(t)}", ["end of statement"])


_DERIV_PREFIX = "__d__"


def parse_expression(text: str, names=None) -> Expr:
    """Parse a standalone expression; ``names`` restricts the free variables."""
    p = _Parser(text, names=None if names is None else set(names))
    e = p.sum()
    t = p.peek()
    if t.kind != "eof":
        p.fail(t, f"unexpected {p._desc(t)}", ["operator", "end of input"])
    return e


# ---------------------------------------------------------------------------
# problem files


@dataclass
class ChartSpec:
    """User-supplied change of variables with its inverse.

    ``forward`` maps new names to expressions in the old variables; its
    first entry is the new independent variable.  ``rectify`` lists pairs
    (coefficients over generator names, target new variable).  ``renames``
    maps a new independent or ``var_1`` to the name used after restriction.
    """

    name: str
    forward: dict
    inverse: dict
    rectify: list = field(default_factory=list)
    renames: dict = field(default_factory=dict)
    solve_for: list = field(default_factory=list)
    span: SourceSpan | None = None

    @property
    def new_independent(self) -> str:
        return next(iter(self.forward))

    @property
    def new_dependents(self) -> list:
        return list(self.forward)[1:]


@dataclass
class StructureSpec:
    name: str | None
    basis: list
    brackets: dict  # (a, b) -> {label: Fraction}
    span: SourceSpan | None = None


@dataclass
class Expectation:
    label: str
    kind: str  # 'equation' (residual expr) or 'field'
    value: object
    span: SourceSpan | None = None


@dataclass
class ProblemDescription:
    independent: str
    dependents: list
    orders: dict
    equations: dict
    generators: list = field(default_factory=list)
    charts: dict = field(default_factory=dict)
    box: dict = field(default_factory=dict)
    structures: dict = field(default_factory=dict)
    changes: dict = field(default_factory=dict)
    expectations: list = field(default_factory=list)

    def system(self) -> OdeSystem:
        return OdeSystem(self.independent, self.dependents, self.orders, self.equations)

    def generator(self, name: str) -> VectorField:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(name)


class _ProblemParser(_Parser):
    def __init__(self, text: str):
        super().__init__(text, derivs=True, newline_ends=True)
        self.independent = None
        self.dependents = []
        self.orders = {}
        self.equations = {}
        self.generators = []
        self.charts = {}
        self.box = {}
        self.structures = {}
        self.changes = {}
        self.expectations = []

    # names available to equations and generators
    def universe(self) -> set:
        out = {self.independent} if self.independent else set()
        for d in self.dependents:
            out |= {jet_name(d, k) for k in range(self.orders[d] + 1)}
        return out

    def run(self) -> ProblemDescription:
        while True:
            self.skip_nl()
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "op" and t.text == ";":
                self.next()
                continue
            if t.kind != "name":
                self.fail(t, f"unexpected {self._desc(t)}", ["statement keyword"])
            handler = getattr(self, "st_" + t.text, None)
            if handler is None:
                self.fail(t, f"unknown statement {t.text!r}", [
                    "independent", "dependent", "equation", "generator", "chart",
                    "box", "structure", "change", "expect"])
            self.next()
            handler(t)
        return self.finish()

    def finish(self) -> ProblemDescription:
        eof = self.peek()
        if self.independent is None and (self.dependents or self.generators):
            self.fail(eof, "missing 'independent' statement")
        for d in self.dependents:
            if d not in self.equations:
                self.fail(eof, f"dependent {d!r} has no equation")
        return ProblemDescription(self.independent, list(self.dependents), dict(self.orders),
                                  dict(self.equations), list(self.generators), dict(self.charts),
                                  dict(self.box), dict(self.structures), dict(self.changes),
                                  list(self.expectations))

    def st_independent(self, kw):
        t = self.expect_kind("name", "variable name")
        if self.independent is not None:
            self.fail(t, "independent variable declared twice")
        self.independent = t.text
        self.end_of_statement()

    def st_dependent(self, kw):
        t = self.expect_kind("name", "variable name")
        if split_jet(t.text)[1] or t.text.startswith("_"):
            self.fail(t, f"{t.text!r} looks like a derivative name")
        if t.text in self.orders or t.text == self.independent:
            self.fail(t, f"variable {t.text!r} declared twice")
        self.expect("order", "name")
        k = self.expect_kind("num", "order")
        if "." in k.text or int(k.text) < 1:
            self.fail(k, "order must be a positive integer")
        self.dependents.append(t.text)
        self.orders[t.text] = int(k.text)
        self.end_of_statement()

    def st_equation(self, kw):
        start = self.peek()
        self.names = None
        lhs = self.postfix()
        if not isinstance(lhs, E.Var):
            self.fail(start, "left side must be a derivative")
        dep, k = split_jet(lhs.name)
        if dep not in self.orders:
            self.fail(start, f"unknown dependent {dep!r}")
        if k != self.orders[dep]:
            self.fail(start, f"left side must be the order-{self.orders[dep]} derivative of {dep}")
        if dep in self.equations:
            self.fail(start, f"duplicate equation for {dep!r}")
        self.expect("=")
        allowed = {self.independent}
        for d in self.dependents:
            allowed |= {jet_name(d, j) for j in range(self.orders[d])}
        rhs_start = self.peek()
        self.names = allowed
        try:
            rhs = self.sum()
        except ParseError as exc:
            name = re.match(r"unknown variable '(.+)'", exc.message)
            if name:
                d2, k2 = split_jet(name.group(1))
                if d2 in self.orders:
                    raise ParseError(
                        f"{name.group(1)} is not below the declared order {self.orders[d2]} of {d2}",
                        exc.span) from None
            raise
        finally:
            self.names = None
        del rhs_start
        self.equations[dep] = rhs
        self.end_of_statement()

    def st_generator(self, kw):
        t = self.expect_kind("name", "generator name")
        if any(g.name == t.text for g in self.generators):
            self.fail(t, f"generator {t.text!r} declared twice")
        self.expect("=")
        start = self.peek()
        self.names = self.universe() | {_DERIV_PREFIX + v for v in self.universe()}
        try:
            body = self.sum()
        finally:
            self.names = None
        self.generators.append(_field_from_expr(t.text, self.independent, body, self, start))
        self.end_of_statement()

    def st_box(self, kw):
        v = self.expect_kind("name", "variable name")
        self.expect("in", "name")
        self.expect("[")
        lo = self.sum()
        self.expect(",")
        hi = self.sum()
        close = self.expect("]")
        try:
            lo_v, hi_v = E.evaluate_exact(lo, {}), E.evaluate_exact(hi, {})
        except (E.NotRational, KeyError):
            self.fail(close, "box bounds must be rational constants")
        if not lo_v < hi_v:
            self.fail(close, "box lower bound must be below the upper bound")
        self.box[v.text] = (lo_v, hi_v)
        self.end_of_statement()

    def st_chart(self, kw):
        chart = _parse_chart_body(self, kw)
        if chart.name in self.charts:
            self.fail(kw, f"chart {chart.name!r} declared twice")
        self.charts[chart.name] = chart

    def st_structure(self, kw):
        name = None
        if self.peek().kind == "name":
            name = self.next().text
        if name in self.structures:
            self.fail(kw, "structure block declared twice")
        self.expect("{")
        self.skip_nl()
        self.expect("basis", "name")
        basis = []
        while self.peek(False).kind == "name":
            basis.append(self.next(False).text)
        if not basis or len(set(basis)) != len(basis):
            self.fail(kw, "basis must list distinct names")
        self.end_of_statement()
        brackets = {}
        while True:
            self.skip_nl()
            if self.accept("}"):
                break
            lb = self.expect("[")
            a = self.expect_kind("name", "basis name")
            self.expect(",")
            b = self.expect_kind("name", "basis name")
            self.expect("]")
            for tok in (a, b):
                if tok.text not in basis:
                    self.fail(tok, f"{tok.text!r} is not in the basis")
            self.expect("=")
            val = _linear_combo(self, basis)
            key = (a.text, b.text)
            if key in brackets or key[::-1] in brackets:
                self.fail(lb, f"bracket [{a.text},{b.text}] given twice")
            brackets[key] = val
            self.end_of_statement()
        self.structures[name] = StructureSpec(name, basis, brackets, kw.span)
        self.end_of_statement()

    def st_change(self, kw):
        """``change NAME { old = combo of new; ... }`` for a basis change."""
        name = self.expect_kind("name", "structure name").text
        self.expect("{")
        rows = {}
        while True:
            self.skip_nl()
            if self.accept("}"):
                break
            old = self.expect_kind("name", "basis name")
            self.expect("=")
            rows[old.text] = _linear_combo(self, None)
            self.end_of_statement()
        self.changes[name] = rows
        self.end_of_statement()

    def st_expect(self, kw):
        kind = "equation"
        if self.at("field", "name"):
            self.next()
            kind = "field"
        label = self.expect_kind("name", "label").text
        while self.accept("."):
            label += "." + self.expect_kind("name", "label").text
        self.expect(":")
        start = self.peek()
        body = self.sum()
        if kind == "equation":
            if self.accept("="):
                body = E.add(body, E.neg(self.sum()))
            value = body
        else:
            value = _raw_field(body, self, start)
        self.expectations.append(Expectation(label, kind, value, kw.span))
        self.end_of_statement()


def _linear_combo(p: _Parser, basis) -> dict:
    """Rational linear combination of names, e.g. ``-Z1 + 2*Z3`` or ``0``."""
    start = p.peek()
    e = p.sum()
    out = {}
    for v in sorted(e.free_vars):
        if basis is not None and v not in basis:
            p.fail(start, f"{v!r} is not in the basis")
        c = E.differentiate(e, v)
        if not isinstance(c, E.Const):
            p.fail(start, "expected a linear combination with rational coefficients")
        if c.value:
            out[v] = c.value
    rest = E.expand(E.add(e, E.neg(E.add(*(E.mul(c, E.Var(v)) for v, c in out.items())))))
    if not E.is_const(rest, 0):
        p.fail(start, "expected a linear combination with rational coefficients")
    return out


def _raw_field(body: Expr, p: _Parser, start: Token) -> dict:
    comps = {}
    derivs = [v for v in body.free_vars if v.startswith(_DERIV_PREFIX)]
    for v in derivs:
        c = E.differentiate(body, v)
        if any(u.startswith(_DERIV_PREFIX) for u in c.free_vars):
            p.fail(start, "vector field must be linear in the d/dv symbols")
        comps[v[len(_DERIV_PREFIX):]] = c
    rest = E.substitute(body, {v: E.ZERO for v in derivs})
    if not E.is_const(rest, 0) or not derivs and not E.is_const(body, 0):
        p.fail(start, "vector field must be a sum of terms coefficient*d/dv")
    return comps


def _field_from_expr(name, independent, body, p, start) -> VectorField:
    comps = _raw_field(body, p, start)
    for v in comps:
        if v != independent and split_jet(v)[1] != 0:
            p.fail(start, f"point generator cannot act on derivative {v!r}")
    xi = comps.pop(independent, E.ZERO)
    return VectorField(name, independent, xi, comps)


def _assignments(p: _Parser, block: Token) -> dict:
    out = {}
    while True:
        p.skip_nl()
        t = p.peek()
        if t.kind == "op" and t.text == "}":
            return out
        if t.kind != "name":
            p.fail(t, f"unexpected {p._desc(t)}", ["assignment", "'}'"])
        if t.text in ("inverse", "rectify", "reduce", "solve") and p.toks[p.i + 1].text == "{":
            return out
        p.next()
        if t.text in out:
            p.fail(t, f"{t.text!r} assigned twice")
        if split_jet(t.text)[1]:
            p.fail(t, f"{t.text!r} looks like a derivative name")
        p.expect("=")
        out[t.text] = p.sum()
        p.end_of_statement()


def _parse_chart_body(p: _Parser, kw: Token) -> ChartSpec:
    name = p.expect_kind("name", "chart name").text
    p.expect("{")
    forward = _assignments(p, kw)
    if not forward:
        p.fail(p.peek(), "chart needs at least the new independent variable")
    inverse = None
    rectify = []
    renames = {}
    solve_for = []
    while True:
        p.skip_nl()
        if p.accept("}"):
            break
        t = p.expect_kind("name", "'inverse', 'rectify', 'reduce' or 'solve'")
        p.expect("{")
        if t.text == "inverse":
            if inverse is not None:
                p.fail(t, "inverse block given twice")
            inverse = _assignments(p, t)
        elif t.text == "rectify":
            while True:
                p.skip_nl()
                if p.at("}"):
                    break
                combo = _linear_combo(p, None)
                if not combo:
                    p.fail(t, "rectify entry needs a generator combination")
                p.expect("=")
                target = p.expect_kind("name", "new variable")
                if target.text not in forward:
                    p.fail(target, f"{target.text!r} is not a new variable of the chart")
                rectify.append((combo, target.text))
                p.end_of_statement()
        elif t.text == "reduce":
            while True:
                p.skip_nl()
                if p.at("}"):
                    break
                new = p.expect_kind("name", "reduced name")
                p.expect("=")
                src = p.postfix()
                if not isinstance(src, E.Var):
                    p.fail(new, "reduce entry must rename a variable")
                renames[src.name] = new.text
                p.end_of_statement()
        elif t.text == "solve":
            while True:
                p.skip_nl()
                if p.at("}"):
                    break
                v = p.postfix()
                if not isinstance(v, E.Var):
                    p.fail(t, "solve lists derivative names")
                solve_for.append(v.name)
                p.accept(",")
                p.accept(";")
        else:
            p.fail(t, f"unknown chart block {t.text!r}", ["inverse", "rectify", "reduce", "solve"])
        p.expect("}")
    if inverse is None:
        p.fail(kw, f"chart {name!r} has no inverse block")
    p.end_of_statement()
    return ChartSpec(name, forward, inverse, rectify, renames, solve_for, kw.span)


def parse_problem(text: str) -> ProblemDescription:
    return _ProblemParser(text).run()


def parse_chart(text: str) -> ChartSpec:
    """Parse a file holding exactly one chart block."""
    p = _ProblemParser(text)
    p.skip_nl()
    kw = p.expect("chart", "name")
    chart = _parse_chart_body(p, kw)
    p.skip_nl()
    t = p.peek()
    if t.kind != "eof":
        p.fail(t, f"unexpected {p._desc(t)}", ["end of input"])
    return chart


def field_text(V: VectorField) -> str:
    """Generator text that parse_problem reads back."""
    return V.text()
