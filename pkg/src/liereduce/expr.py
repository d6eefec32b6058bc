"""Immutable symbolic expressions over exact rationals.

Every constructor canonicalizes: sums and products are flattened, like terms
are collected, powers of a common base are merged, ``exp`` factors of a
product are merged into a single ``exp`` and the inverse pairs ``exp(ln u)``
and ``ln(exp u)`` collapse.  Two expressions built from the same value are
therefore structurally equal in the common cases; everything else is decided
numerically by :func:`equals_probabilistic`.
"""

from __future__ import annotations

import math
import random
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


class MalformedExpression(ValueError):
    pass


class DomainError(ArithmeticError):
    """Evaluation left the real domain (ln of a non-positive value, 1/0, ...)."""


class SamplingExhausted(RuntimeError):
    """No valid sample point could be drawn inside the sampling box."""


class SingularSystemError(ArithmeticError):
    def __init__(self, column: int, message: str = ""):
        self.column = column
        super().__init__(message or f"pivot in column {column} vanishes identically")


# ---------------------------------------------------------------------------
# node types


class Expr:
    __slots__ = ("_hash", "_key", "_free")

    def __init__(self):
        self._hash = None
        self._key = None
        self._free = None

    # structural identity -------------------------------------------------
    @property
    def key(self) -> tuple:
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self) -> tuple:  # pragma: no cover - abstract
        raise NotImplementedError

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return hash(self) == hash(other) and self.key == other.key

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __lt__(self, other):
        return self.key < other.key

    @property
    def free_vars(self) -> frozenset:
        if self._free is None:
            self._free = self._compute_free()
        return self._free

    def _compute_free(self) -> frozenset:
        out = frozenset()
        for c in self.children:
            out |= c.free_vars
        return out

    @property
    def children(self) -> tuple:
        return ()

    # arithmetic sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), MINUS_ONE))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, MINUS_ONE))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = Fraction(value)

    def _make_key(self):
        return (0, self.value)

    def _compute_free(self):
        return frozenset()


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        self.name = name

    def _make_key(self):
        return (1, self.name)

    def _compute_free(self):
        return frozenset((self.name,))


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        super().__init__()
        self.name = name
        self.arg = arg

    @property
    def children(self):
        return (self.arg,)

    def _make_key(self):
        return (2, self.name, self.arg.key)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Expr):
        super().__init__()
        self.base = base
        self.exp = exp

    @property
    def children(self):
        return (self.base, self.exp)

    def _make_key(self):
        return (3, self.base.key, self.exp.key)


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        super().__init__()
        self.factors = factors

    @property
    def children(self):
        return self.factors

    def _make_key(self):
        return (4, tuple(f.key for f in self.factors))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        super().__init__()
        self.terms = terms

    @property
    def children(self):
        return self.terms

    def _make_key(self):
        return (5, tuple(t.key for t in self.terms))


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)
HALF = Const(Fraction(1, 2))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(x)
    if isinstance(x, str):
        return Var(x)
    raise MalformedExpression(f"cannot convert {x!r} to an expression")


def var(name: str) -> Var:
    return Var(name)


def const(value) -> Const:
    return Const(value)


def is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# ---------------------------------------------------------------------------
# canonicalizing constructors


def _split_coeff(term: Expr):
    """Return (rational coefficient, rest) with rest None for constants."""
    if isinstance(term, Const):
        return term.value, None
    if isinstance(term, Mul) and isinstance(term.factors[0], Const):
        rest = term.factors[1:]
        return term.factors[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return Fraction(1), term


def _attach(c: Fraction, rest: Expr) -> Expr:
    if c == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(c),) + rest.factors)
    if isinstance(rest, Add):
        return add(*(_attach(c * k, r) if r is not None else Const(c * k)
                     for k, r in map(_split_coeff, rest.terms)))
    return Mul((Const(c), rest))


def add(*args) -> Expr:
    flat = []
    for a in args:
        a = as_expr(a)
        if isinstance(a, Add):
            flat.extend(a.terms)
        else:
            flat.append(a)
    constant = Fraction(0)
    coeffs: dict = {}
    for t in flat:
        c, rest = _split_coeff(t)
        if rest is None:
            constant += c
        else:
            coeffs[rest] = coeffs.get(rest, 0) + c
    terms = [_attach(c, rest) for rest, c in coeffs.items() if c != 0]
    # _attach may hand back a sum only for rest that were Add, which never
    # happens for flattened input; guard anyway
    if any(isinstance(t, Add) for t in terms):
        return add(Const(constant), *terms)
    terms.sort(key=lambda t: t.key)
    if constant != 0:
        terms.insert(0, Const(constant))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def neg(e: Expr) -> Expr:
    return mul(MINUS_ONE, e)


def mul(*args) -> Expr:
    return _mul(args, 0)


def _mul(args, depth: int) -> Expr:
    flat = []
    for a in args:
        a = as_expr(a)
        if isinstance(a, Mul):
            flat.extend(a.factors)
        else:
            flat.append(a)
    coeff = Fraction(1)
    exp_args = []
    bases: dict = {}
    for f in flat:
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Func) and f.name == "exp":
            exp_args.append(f.arg)
        elif isinstance(f, Pow):
            bases.setdefault(f.base, []).append(f.exp)
        else:
            bases.setdefault(f, []).append(ONE)
    if coeff == 0:
        return ZERO
    factors = []
    rerun = False
    if exp_args:
        e = func("exp", add(*exp_args)) if len(exp_args) > 1 else Func("exp", exp_args[0])
        if isinstance(e, Const):
            coeff *= e.value
        elif isinstance(e, Func) and e.name == "exp":
            factors.append(e)
        else:
            factors.append(e)
            rerun = True
    for base, exps in bases.items():
        p = power(base, add(*exps)) if len(exps) > 1 else (
            base if exps[0] is ONE else Pow(base, exps[0]))
        if isinstance(p, Const):
            coeff *= p.value
        elif isinstance(p, Mul) or (isinstance(p, Func) and p.name == "exp" and exp_args):
            factors.append(p)
            rerun = True
        else:
            factors.append(p)
    if rerun and depth < 8:
        return _mul([Const(coeff)] + factors, depth + 1)
    if coeff == 0:
        return ZERO
    factors.sort(key=lambda f: f.key)
    if not factors:
        return Const(coeff)
    if len(factors) == 1:
        if coeff == 1:
            return factors[0]
        if isinstance(factors[0], Add):
            return _attach(coeff, factors[0])
    if coeff != 1:
        factors.insert(0, Const(coeff))
    return Mul(tuple(factors))


def _exact_root(value: Fraction, n: int):
    if value < 0:
        return None
    out = []
    for part in (value.numerator, value.denominator):
        r = round(part ** (1.0 / n))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** n == part:
                out.append(cand)
                break
        else:
            return None
    return Fraction(out[0], out[1])


def power(base, exp) -> Expr:
    base = as_expr(base)
    exp = as_expr(exp)
    if isinstance(exp, Const):
        n = exp.value
        if n == 0:
            return ONE
        if n == 1:
            return base
        if isinstance(base, Const):
            b = base.value
            if b == 0:
                if n < 0:
                    raise DomainError("division by zero")
                return ZERO
            if b == 1:
                return ONE
            if n.denominator == 1:
                return Const(b ** int(n))
            root = _exact_root(b, n.denominator)
            if root is not None:
                return Const(root ** n.numerator)
            return Pow(base, exp)
        if n.denominator == 1:
            if isinstance(base, Pow):
                return power(base.base, mul(base.exp, exp))
            if isinstance(base, Mul):
                return mul(*(power(f, exp) for f in base.factors))
    else:
        if isinstance(base, Const) and base.value == 1:
            return ONE
    if isinstance(base, Func) and base.name == "exp":
        return func("exp", mul(base.arg, exp))
    return Pow(base, exp)


def func(name: str, arg) -> Expr:
    arg = as_expr(arg)
    if name == "sqrt":
        return power(arg, HALF)
    if name not in FUNCTIONS:
        raise MalformedExpression(f"unknown function {name!r}")
    if name == "exp":
        if is_const(arg, 0):
            return ONE
        if isinstance(arg, Func) and arg.name == "ln":
            return arg.arg
    elif name == "ln":
        if is_const(arg, 1):
            return ZERO
        if isinstance(arg, Func) and arg.name == "exp":
            return arg.arg
    elif name == "sin":
        if is_const(arg, 0):
            return ZERO
    elif name == "cos":
        if is_const(arg, 0):
            return ONE
    return Func(name, arg)


def exp(arg) -> Expr:
    return func("exp", arg)


def ln(arg) -> Expr:
    return func("ln", arg)


def sin(arg) -> Expr:
    return func("sin", arg)


def cos(arg) -> Expr:
    return func("cos", arg)


def sqrt(arg) -> Expr:
    return func("sqrt", arg)


# ---------------------------------------------------------------------------
# structural operations


def rebuild(e: Expr, children) -> Expr:
    if isinstance(e, Add):
        return add(*children)
    if isinstance(e, Mul):
        return mul(*children)
    if isinstance(e, Pow):
        return power(*children)
    if isinstance(e, Func):
        return func(e.name, children[0])
    return e


def simplify(e: Expr) -> Expr:
    """Re-run the canonical rewrite set bottom-up until nothing changes."""
    for _ in range(16):
        new = _resimplify(e)
        if new == e:
            return new
        e = new
    return e


@lru_cache(maxsize=100_000)
def _resimplify(e: Expr) -> Expr:
    if not e.children:
        return e
    return rebuild(e, [_resimplify(c) for c in e.children])


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Simultaneous replacement of variables by expressions."""
    if not bindings:
        return e
    bindings = {k: as_expr(v) for k, v in bindings.items()}
    names = frozenset(bindings)
    memo: dict = {}

    def go(node: Expr) -> Expr:
        if not (node.free_vars & names):
            return node
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = bindings[node.name]
        else:
            out = rebuild(node, [go(c) for c in node.children])
        memo[node] = out
        return out

    return go(e)


def differentiate(e: Expr, v: str) -> Expr:
    return _diff(e, v)


@lru_cache(maxsize=200_000)
def _diff(e: Expr, v: str) -> Expr:
    if v not in e.free_vars:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(_diff(t, v) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        parts = []
        for i, f in enumerate(fs):
            d = _diff(f, v)
            if not is_const(d, 0):
                parts.append(mul(*fs[:i], d, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Pow):
        b, x = e.base, e.exp
        if isinstance(x, Const):
            return mul(x, power(b, Const(x.value - 1)), _diff(b, v))
        return mul(e, add(mul(_diff(x, v), ln(b)),
                          mul(x, _diff(b, v), power(b, MINUS_ONE))))
    if isinstance(e, Func):
        d = _diff(e.arg, v)
        if e.name == "exp":
            return mul(e, d)
        if e.name == "ln":
            return mul(d, power(e.arg, MINUS_ONE))
        if e.name == "sin":
            return mul(cos(e.arg), d)
        if e.name == "cos":
            return mul(MINUS_ONE, sin(e.arg), d)
    raise MalformedExpression(f"cannot differentiate node {e!r}")


def expand(e: Expr) -> Expr:
    """Distribute products over sums and expand small positive integer powers."""
    return _expand(e)


@lru_cache(maxsize=50_000)
def _expand(e: Expr) -> Expr:
    if not e.children:
        return e
    if isinstance(e, Add):
        return add(*(_expand(t) for t in e.terms))
    if isinstance(e, Mul):
        acc = [ONE]
        for f in e.factors:
            f = _expand(f)
            fterms = f.terms if isinstance(f, Add) else (f,)
            acc = [mul(a, b) for a in acc for b in fterms]
            if len(acc) > 400:
                return e
        return add(*acc)
    if isinstance(e, Pow):
        b = _expand(e.base)
        if (isinstance(e.exp, Const) and e.exp.value.denominator == 1
                and 1 < e.exp.value <= 6 and isinstance(b, Add)):
            out = list(b.terms)
            for _ in range(int(e.exp.value) - 1):
                out = [mul(p, q) for p in out for q in b.terms]
                if len(out) > 400:
                    return power(b, e.exp)
                out = list(_terms(add(*out)))
            return add(*out)
        return power(b, _expand(e.exp))
    return rebuild(e, [_expand(c) for c in e.children])


def _terms(e: Expr) -> tuple:
    return e.terms if isinstance(e, Add) else (e,)


def size(e: Expr) -> int:
    return 1 + sum(size(c) for c in e.children)


def _factors(term: Expr):
    """(coefficient, {base: rational exponent}, exp argument or None)."""
    c, rest = _split_coeff(term)
    bases: dict = {}
    exp_arg = None
    if rest is None:
        return c, bases, exp_arg
    for f in (rest.factors if isinstance(rest, Mul) else (rest,)):
        if isinstance(f, Func) and f.name == "exp":
            exp_arg = f.arg
        elif isinstance(f, Pow) and isinstance(f.exp, Const):
            bases[f.base] = f.exp.value
        else:
            bases[f] = Fraction(1)
    return c, bases, exp_arg


def factor_terms(e: Expr) -> Expr:
    """Pull factors shared by every term of a sum out of it, bottom-up.

    Shared bases come out with their smallest exponent, so a sum of
    fractions over powers of one denominator is put over that power.
    """
    return _factor_terms(e)


@lru_cache(maxsize=50_000)
def _factor_terms(e: Expr) -> Expr:
    if not e.children:
        return e
    if not isinstance(e, Add):
        return rebuild(e, [_factor_terms(c) for c in e.children])
    terms = [_factor_terms(t) for t in e.terms]
    parts = [_factors(t) for t in terms]
    common = dict(parts[0][1])
    for _, bases, _ in parts[1:]:
        for b in list(common):
            if b in bases:
                common[b] = min(common[b], bases[b])
            else:
                del common[b]
    args = {p[2] for p in parts}
    shared_exp = next(iter(args)) if len(args) == 1 and None not in args else None
    if not common and shared_exp is None:
        return add(*terms)
    pulled = [power(b, Const(x)) for b, x in common.items()]
    if shared_exp is not None:
        pulled.append(exp(shared_exp))
    inv = mul(*(power(p, MINUS_ONE) for p in pulled))
    inner = add(*(mul(t, inv) for t in terms))
    return mul(*pulled, _factor_terms(inner) if isinstance(inner, Add) else inner)


def tidy(e: Expr) -> Expr:
    """Smallest of the canonical, expanded and factored forms."""
    best = e
    for cand in (expand(e), factor_terms(e)):
        if size(cand) < size(best):
            best = cand
    x = factor_terms(expand(e))
    if size(x) < size(best):
        best = x
    return best


# ---------------------------------------------------------------------------
# numeric evaluation


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    return _eval(e, point, {})[0]


def evaluate_with_scale(e: Expr, point: Mapping[str, float]):
    """Value plus a magnitude bound for the rounding error of the evaluation.

    The scale grows with intermediate values that cancel, so comparisons of
    the form ``|a - b| <= rel * scale`` are not fooled by cancellation noise.
    """
    return _eval(e, point, {})


def _eval(e: Expr, point, memo):
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    try:
        out = _eval_node(e, point, memo)
    except (OverflowError, ZeroDivisionError, ValueError) as exc:
        raise DomainError(str(exc)) from None
    if not math.isfinite(out[0]):
        raise DomainError("non-finite value")
    memo[id(e)] = out
    return out


def _eval_node(e: Expr, point, memo):
    if isinstance(e, Const):
        v = float(e.value)
        return v, abs(v)
    if isinstance(e, Var):
        try:
            v = float(point[e.name])
        except KeyError:
            raise MalformedExpression(f"unbound variable {e.name!r}") from None
        return v, abs(v)
    if isinstance(e, Add):
        v = s = 0.0
        for t in e.terms:
            tv, ts = _eval(t, point, memo)
            v += tv
            s += ts
        return v, s
    if isinstance(e, Mul):
        v = s = 1.0
        for f in e.factors:
            fv, fs = _eval(f, point, memo)
            v *= fv
            s *= fs
        return v, s
    if isinstance(e, Pow):
        bv, bs = _eval(e.base, point, memo)
        if isinstance(e.exp, Const):
            n = e.exp.value
            if bv == 0:
                if n < 0:
                    raise DomainError("division by zero")
                return 0.0, bs ** float(n)
            if bv < 0 and n.denominator != 1:
                raise DomainError("fractional power of a negative value")
            v = bv ** int(n) if n.denominator == 1 else bv ** float(n)
            return v, abs(v) * max(1.0, abs(float(n)) * bs / abs(bv))
        xv, xs = _eval(e.exp, point, memo)
        if bv <= 0:
            raise DomainError("symbolic power of a non-positive value")
        v = bv ** xv
        return v, abs(v) * max(1.0, abs(xv) * bs / bv + abs(math.log(bv)) * xs)
    if isinstance(e, Func):
        av, as_ = _eval(e.arg, point, memo)
        if e.name == "exp":
            v = math.exp(av)
            return v, v * max(1.0, as_)
        if e.name == "ln":
            if av <= 0:
                raise DomainError("ln of a non-positive value")
            v = math.log(av)
            return v, max(abs(v), as_ / av)
        if e.name == "sin":
            v = math.sin(av)
            return v, max(abs(v), as_)
        if e.name == "cos":
            v = math.cos(av)
            return v, max(abs(v), as_)
    raise MalformedExpression(f"cannot evaluate node {e!r}")


class NotRational(ValueError):
    pass


def evaluate_exact(e: Expr, point: Mapping[str, Fraction]) -> Fraction:
    """Exact rational value; raises NotRational for transcendental results."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return Fraction(point[e.name])
    if isinstance(e, Add):
        return sum((evaluate_exact(t, point) for t in e.terms), Fraction(0))
    if isinstance(e, Mul):
        out = Fraction(1)
        for f in e.factors:
            out *= evaluate_exact(f, point)
        return out
    if isinstance(e, Pow) and isinstance(e.exp, Const) and e.exp.value.denominator == 1:
        b = evaluate_exact(e.base, point)
        if b == 0 and e.exp.value < 0:
            raise DomainError("division by zero")
        return b ** int(e.exp.value)
    if isinstance(e, Func):
        a = evaluate_exact(e.arg, point)
        if a == 0 and e.name in ("sin",):
            return Fraction(0)
        if a == 0 and e.name in ("exp", "cos"):
            return Fraction(1)
        if a == 1 and e.name == "ln":
            return Fraction(0)
    raise NotRational(to_text(e))


# ---------------------------------------------------------------------------
# probabilistic identity testing


@dataclass(frozen=True)
class EqualityConfig:
    trials: int = 8
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    box: Mapping[str, tuple] = field(default_factory=dict)
    default_box: tuple = (Fraction(1, 2), Fraction(2))
    seed: int = 0
    max_retries: int = 200

    def __post_init__(self):
        if self.trials < 3:
            raise ValueError("trial count must be at least 3")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")

    def interval(self, name: str) -> tuple:
        return self.box.get(name, self.default_box)

    def with_box(self, box: Mapping[str, tuple]) -> "EqualityConfig":
        merged = dict(self.box)
        merged.update(box)
        return EqualityConfig(self.trials, self.rel_tol, self.abs_tol, merged,
                              self.default_box, self.seed, self.max_retries)

    def strict(self) -> "EqualityConfig":
        """Config for structural decisions (pivots, dependence), never looser than the defaults."""
        return EqualityConfig(self.trials, min(self.rel_tol, 1e-9), min(self.abs_tol, 1e-12), self.box,
                              self.default_box, self.seed, self.max_retries)


_GRID = 1 << 20


class PointSampler:
    """Deterministic source of dyadic-rational sample points.

    Dyadic points are exactly representable as floats, so the exact and the
    floating evaluations see the same point.
    """

    def __init__(self, names: Iterable[str], cfg: EqualityConfig, salt: str = ""):
        self.names = sorted(set(names))
        tag = "|".join(self.names) + "#" + salt
        self.rng = random.Random(cfg.seed * 1_000_003 + zlib.crc32(tag.encode()))
        self.cfg = cfg

    def exact(self) -> dict:
        pt = {}
        for n in self.names:
            lo, hi = (Fraction(x) for x in self.cfg.interval(n))
            k = self.rng.randrange(1, _GRID)
            pt[n] = lo + (hi - lo) * Fraction(k, _GRID)
        return pt

    def floating(self) -> dict:
        return {k: float(v) for k, v in self.exact().items()}


@dataclass
class EqualityVerdict:
    equal: bool
    trials: int
    witness: dict | None = None
    lhs: float | None = None
    rhs: float | None = None

    def __bool__(self):
        return self.equal


def _close(av, ascale, bv, bscale, cfg: EqualityConfig) -> bool:
    scale = max(abs(av), abs(bv), ascale, bscale)
    return abs(av - bv) <= cfg.abs_tol + cfg.rel_tol * scale


def equals_probabilistic(a: Expr, b: Expr, cfg: EqualityConfig | None = None) -> EqualityVerdict:
    cfg = cfg or EqualityConfig()
    a, b = as_expr(a), as_expr(b)
    if a == b:
        return EqualityVerdict(True, 0)
    sampler = PointSampler(a.free_vars | b.free_vars, cfg, salt="eq")
    done = retries = 0
    while done < cfg.trials:
        pt = sampler.floating()
        try:
            av, as_ = evaluate_with_scale(a, pt)
            bv, bs = evaluate_with_scale(b, pt)
        except DomainError:
            retries += 1
            if retries > cfg.max_retries:
                raise SamplingExhausted(
                    f"no valid sample point for {to_text(a)} vs {to_text(b)}") from None
            continue
        done += 1
        if not _close(av, as_, bv, bs, cfg):
            return EqualityVerdict(False, done, pt, av, bv)
    return EqualityVerdict(True, done)


def is_zero(e: Expr, cfg: EqualityConfig | None = None) -> EqualityVerdict:
    return equals_probabilistic(e, ZERO, cfg)


def depends_on(e: Expr, v: str, cfg: EqualityConfig | None = None) -> bool:
    if v not in e.free_vars:
        return False
    return not is_zero(differentiate(e, v), (cfg or EqualityConfig()).strict())


def solve_linear_symbolic(M: Sequence[Sequence[Expr]], rhs: Sequence[Expr],
                          cfg: EqualityConfig | None = None) -> list:
    """Gaussian elimination over the field of expressions.

    Pivots are accepted when they are not probabilistically zero; the
    solution is checked by substituting back.
    """
    cfg = cfg or EqualityConfig()
    n = len(M)
    if any(len(row) != n for row in M) or len(rhs) != n:
        raise ValueError("matrix must be square and match the right-hand side")
    A = [[as_expr(x) for x in row] + [as_expr(r)] for row, r in zip(M, rhs)]
    decide = cfg.strict()
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not is_zero(A[r][col], decide):
                piv = r
                break
        if piv is None:
            raise SingularSystemError(col)
        A[col], A[piv] = A[piv], A[col]
        inv = power(A[col][col], MINUS_ONE)
        for r in range(col + 1, n):
            if is_const(A[r][col], 0):
                continue
            f = mul(A[r][col], inv)
            A[r] = [add(A[r][k], neg(mul(f, A[col][k]))) if k >= col else A[r][k]
                    for k in range(n + 1)]
    sol = [ZERO] * n
    for r in range(n - 1, -1, -1):
        acc = A[r][n]
        for k in range(r + 1, n):
            acc = add(acc, neg(mul(A[r][k], sol[k])))
        sol[r] = tidy(mul(acc, power(A[r][r], MINUS_ONE)))
    for row, r in zip(M, rhs):
        lhs = add(*(mul(as_expr(m), s) for m, s in zip(row, sol)))
        if not equals_probabilistic(lhs, as_expr(r), cfg):
            raise ArithmeticError("back-substitution residual is not zero")
    return sol


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 2, 3, 4


def to_text(e: Expr) -> str:
    return _fmt(e)[0]


def _wrap(part, need):
    s, p = part
    return f"({s})" if p < need else s


def _fmt_const(v: Fraction):
    if v.denominator == 1:
        return (str(v.numerator), _PREC_ATOM) if v >= 0 else (str(v.numerator), _PREC_NEG)
    return f"{v.numerator}/{v.denominator}", _PREC_MUL


def _fmt(e: Expr):
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Func):
        return f"{e.name}({_fmt(e.arg)[0]})", _PREC_ATOM
    if isinstance(e, Pow):
        base = _wrap(_fmt(e.base), _PREC_ATOM)
        x = e.exp
        if isinstance(x, Const) and x.value.denominator == 1 and x.value >= 0:
            ex = str(x.value.numerator)
        else:
            ex = _wrap(_fmt(x), _PREC_ATOM)
        return f"{base}^{ex}", _PREC_POW
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            c, _ = _split_coeff(t)
            if i and c < 0:
                parts.append(" - " + _wrap(_fmt(neg(t)), _PREC_MUL))
            elif i:
                parts.append(" + " + _wrap(_fmt(t), _PREC_MUL))
            else:
                parts.append(_fmt(t)[0])
        return "".join(parts), _PREC_ADD
    if isinstance(e, Mul):
        c, _ = _split_coeff(e)
        fs = [f for f in e.factors if not isinstance(f, Const)]
        num, den = [], []
        for f in fs:
            if isinstance(f, Pow) and isinstance(f.exp, Const) and f.exp.value < 0:
                den.append(power(f.base, Const(-f.exp.value)))
            else:
                num.append(f)
        sign = "-" if c < 0 else ""
        c = abs(c)
        num_s = [_wrap(_fmt(f), _PREC_POW) for f in num]
        if c.numerator != 1 or not num_s:
            num_s.insert(0, str(c.numerator))
        den_s = [_wrap(_fmt(f), _PREC_POW) for f in den]
        if c.denominator != 1:
            den_s.insert(0, str(c.denominator))
        s = "*".join(num_s)
        for d in den_s:
            s += "/" + d
        return sign + s, (_PREC_NEG if sign else _PREC_MUL)
    raise MalformedExpression(f"cannot print {e!r}")
