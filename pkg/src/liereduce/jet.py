"""Vector fields on jet space, total derivatives and the symmetry condition.

Jet coordinates are plain variables: the dependent ``x`` itself, then
``x_1``, ``x_2``, ... for its derivatives with respect to the independent
variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from . import expr as E
from .expr import EqualityConfig, Expr

_JET = re.compile(r"^(.+?)_(\d+)$")


def jet_name(dep: str, k: int) -> str:
    return dep if k == 0 else f"{dep}_{k}"


def split_jet(name: str):
    """Return (dependent, order); a plain name is order 0."""
    m = _JET.match(name)
    if m:
        return m.group(1), int(m.group(2))
    return name, 0


class JetOrderError(ValueError):
    pass


@dataclass(frozen=True)
class OdeSystem:
    """Solved-form system: ``dep_{order} = rhs[dep]``.

    A dependent with order 0 carries an algebraic relation ``dep = rhs``.
    """

    independent: str
    dependents: tuple
    orders: Mapping[str, int]
    rhs: Mapping[str, Expr]

    def __post_init__(self):
        object.__setattr__(self, "dependents", tuple(self.dependents))
        object.__setattr__(self, "orders", dict(self.orders))
        object.__setattr__(self, "rhs", dict(self.rhs))
        if set(self.orders) != set(self.dependents) or set(self.rhs) != set(self.dependents):
            raise ValueError("every dependent needs exactly one order and one equation")

    def top(self, dep: str) -> str:
        return jet_name(dep, self.orders[dep])

    def tops(self) -> dict:
        """Top jet name -> right-hand side."""
        return {self.top(d): self.rhs[d] for d in self.dependents}

    def coordinates(self) -> list:
        """Independent plus every jet coordinate below the top orders."""
        out = [self.independent]
        for d in self.dependents:
            out += [jet_name(d, k) for k in range(self.orders[d])]
        return out

    def max_order(self) -> int:
        return max(self.orders.values(), default=0)

    def has_algebraic(self) -> bool:
        return any(o == 0 for o in self.orders.values())

    def equations_text(self) -> list:
        return [f"{self.top(d)} = {E.to_text(self.rhs[d])}" for d in self.dependents]


def system_dimension(sys: OdeSystem) -> int:
    return sum(sys.orders.values())


@dataclass(frozen=True)
class VectorField:
    """``xi * d/d(independent) + sum eta[v] * d/dv``.

    ``order`` is 0 for a point generator and k after prolongation to k-th
    derivatives.
    """

    name: str
    independent: str
    xi: Expr
    eta: Mapping[str, Expr] = field(default_factory=dict)
    order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eta", {k: v for k, v in self.eta.items()})

    def components(self) -> dict:
        out = {self.independent: self.xi}
        out.update(self.eta)
        return out

    def apply(self, f: Expr) -> Expr:
        """Action as a derivation on a scalar function."""
        terms = []
        for v, c in self.components().items():
            if v in f.free_vars and not E.is_const(c, 0):
                terms.append(E.mul(c, E.differentiate(f, v)))
        return E.add(*terms)

    def is_zero(self) -> bool:
        return all(E.is_const(c, 0) for c in self.components().values())

    def renamed(self, name: str) -> "VectorField":
        return VectorField(name, self.independent, self.xi, self.eta, self.order)

    def scaled_sum(self, others: list, coeffs: list, name: str) -> "VectorField":
        """Linear combination ``sum c_i V_i`` with this field as template."""
        comps: dict = {}
        for c, V in zip(coeffs, others):
            for v, e in V.components().items():
                comps[v] = E.add(comps.get(v, E.ZERO), E.mul(E.Const(c), e))
        xi = comps.pop(self.independent, E.ZERO)
        return VectorField(name, self.independent, xi,
                           {k: v for k, v in comps.items() if not E.is_const(v, 0)},
                           max((V.order for V in others), default=0))

    def text(self) -> str:
        parts = []
        for v, c in self.components().items():
            if E.is_const(c, 0):
                continue
            if E.is_const(c, 1):
                parts.append(f"d/d{v}")
            else:
                ct = E.to_text(c)
                parts.append(f"({ct})*d/d{v}" if isinstance(c, E.Add) else f"{ct}*d/d{v}")
        return " + ".join(parts) if parts else "0"


def combine(fields: list, coeffs, name: str) -> VectorField:
    return fields[0].scaled_sum(fields, list(coeffs), name)


def free_total_derivative(f: Expr, independent: str) -> Expr:
    """``d/dt`` treating every jet variable as a function of t, no system."""
    terms = [E.differentiate(f, independent)]
    for v in f.free_vars:
        if v == independent:
            continue
        dep, k = split_jet(v)
        terms.append(E.mul(E.Var(jet_name(dep, k + 1)), E.differentiate(f, v)))
    return E.add(*terms)


def total_derivative(f: Expr, sys: OdeSystem) -> Expr:
    """The operator A: free total derivative with the top orders replaced."""
    allowed = set(sys.coordinates())
    for v in f.free_vars:
        if v not in allowed:
            dep, k = split_jet(v)
            if dep in sys.orders:
                raise JetOrderError(
                    f"{v} is at or above the declared order {sys.orders[dep]} of {dep}")
    return E.substitute(free_total_derivative(f, sys.independent), sys.tops())


def operator_field(sys: OdeSystem) -> VectorField:
    """A as a vector field on the coordinates of the system."""
    eta = {}
    for d in sys.dependents:
        n = sys.orders[d]
        for k in range(n):
            eta[jet_name(d, k)] = sys.rhs[d] if k == n - 1 else E.Var(jet_name(d, k + 1))
    return VectorField("A", sys.independent, E.ONE, eta, order=sys.max_order())


def prolong(Z: VectorField, order) -> VectorField:
    """Prolong a point generator.

    ``order`` is an int applied to every dependent named in ``Z.eta``, or a
    mapping dependent -> order. Pass the mapping when a dependent may have a
    zero (hence absent) coefficient but still needs its jet components.
    Uses eta^(k) = D eta^(k-1) - y_k D xi with D the free total derivative.
    """
    if Z.order:
        raise ValueError(f"{Z.name} is already prolonged")
    t = Z.independent
    Dxi = free_total_derivative(Z.xi, t)
    eta = dict(Z.eta)
    deps = list(Z.eta) if not isinstance(order, Mapping) else list(order)
    for d in deps:
        n = order[d] if isinstance(order, Mapping) else order
        if n < 0:
            raise ValueError("prolongation order must be non-negative")
        prev = Z.eta.get(d, E.ZERO)
        for k in range(1, n + 1):
            yk = E.Var(jet_name(d, k))
            prev = E.add(free_total_derivative(prev, t), E.neg(E.mul(yk, Dxi)))
            if not E.is_const(prev, 0):
                eta[jet_name(d, k)] = prev
    top = max(order.values(), default=0) if isinstance(order, Mapping) else order
    return VectorField(Z.name, t, Z.xi, eta, order=top)


def commutator(V: VectorField, W: VectorField, name: str | None = None) -> VectorField:
    if V.independent != W.independent:
        raise ValueError(f"fields live on different independents: {V.independent} vs {W.independent}")
    vc, wc = V.components(), W.components()
    comps = {}
    for v in list(vc) + [k for k in wc if k not in vc]:
        c = E.tidy(E.add(V.apply(wc.get(v, E.ZERO)), E.neg(W.apply(vc.get(v, E.ZERO)))))
        if not E.is_const(c, 0) or v == V.independent:
            comps[v] = c
    xi = comps.pop(V.independent)
    return VectorField(name or f"[{V.name},{W.name}]", V.independent, xi, comps,
                       max(V.order, W.order))


def fields_equal(V: VectorField, W: VectorField, cfg: EqualityConfig | None = None):
    """Component-wise probabilistic equality; returns (ok, first bad component)."""
    vc, wc = V.components(), W.components()
    for v in sorted(set(vc) | set(wc)):
        ok = E.equals_probabilistic(vc.get(v, E.ZERO), wc.get(v, E.ZERO), cfg)
        if not ok:
            return False, (v, ok)
    return True, None


@dataclass
class SymmetryReport:
    generator: str
    passed: bool
    lam: Expr
    components: list  # (jet variable, EqualityVerdict)
    reason: str = ""

    def failing(self) -> list:
        return [(v, r) for v, r in self.components if not r.equal]


def check_symmetry(Z: VectorField, sys: OdeSystem, cfg: EqualityConfig | None = None) -> SymmetryReport:
    """Verify [Z^(n-1), A] = lambda A with lambda = -A(xi)."""
    cfg = cfg or EqualityConfig()
    if Z.order:
        raise ValueError("check_symmetry expects a point generator")
    if sys.has_algebraic():
        raise ValueError("symmetry condition needs differential equations only")
    lam = E.neg(total_derivative(Z.xi, sys)) if sys.coordinates() else E.ZERO
    extra = set(Z.components()) - set(sys.coordinates())
    if extra:
        lam_text = E.to_text(lam)
        return SymmetryReport(Z.name, False, lam, [],
                              f"generator mentions {sorted(extra)} outside the system ({lam_text})")
    Zp = prolong(Z, {d: sys.orders[d] - 1 for d in sys.dependents})
    A = operator_field(sys)
    br = commutator(Zp, A)
    bc, ac = br.components(), A.components()
    comps = []
    for v in sys.coordinates():
        lhs = bc.get(v, E.ZERO)
        rhs = E.mul(lam, ac.get(v, E.ZERO))
        comps.append((v, E.equals_probabilistic(lhs, rhs, cfg)))
    return SymmetryReport(Z.name, all(r.equal for _, r in comps), lam, comps)
