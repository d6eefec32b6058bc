"""Order reduction along the coset chain of a solvable symmetry algebra.

One step takes an Abelian coset of generators and a user chart in which
those generators become translations, rewrites the system in the chart,
drops the translated variables (keeping their first derivatives) and
pushes the surviving generators down to the smaller system.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _linalg as L
from . import algebra as A
from . import expr as E
from .expr import EqualityConfig, Expr
from .jet import (OdeSystem, VectorField, check_symmetry, combine, commutator,
                  fields_equal, free_total_derivative, jet_name, prolong,
                  split_jet, system_dimension)
from .parser import ChartSpec, ProblemDescription, parse_expression
from .report import Check, StepFailed, from_verdict

SESSION_VERSION = "liereduce-session/1"


class ChartError(ValueError):
    pass


class DegenerateChartError(ChartError):
    pass


class CyclicityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    spec: ChartSpec
    old_independent: str
    old_dependents: tuple

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def new_independent(self) -> str:
        return self.spec.new_independent

    @property
    def new_dependents(self) -> list:
        return self.spec.new_dependents

    @property
    def forward(self) -> dict:
        return self.spec.forward

    @property
    def inverse(self) -> dict:
        return self.spec.inverse

    def jacobian(self) -> list:
        olds = [self.old_independent] + list(self.old_dependents)
        return [[E.differentiate(self.forward[n], o) for o in olds] for n in self.forward]


def make_chart(spec: ChartSpec, independent: str, dependents: Sequence[str]) -> Chart:
    olds = [independent] + list(dependents)
    if set(spec.inverse) != set(olds):
        raise ChartError(f"inverse of chart {spec.name!r} must define exactly {sorted(olds)}, "
                         f"got {sorted(spec.inverse)}")
    if len(spec.forward) != len(olds):
        raise ChartError(f"chart {spec.name!r} needs {len(olds)} new variables")
    for n, e in spec.forward.items():
        bad = e.free_vars - set(olds)
        if bad:
            raise ChartError(f"{n} = {E.to_text(e)} uses {sorted(bad)} which are not current variables")
    for o, e in spec.inverse.items():
        bad = e.free_vars - set(spec.forward)
        if bad:
            raise ChartError(f"inverse {o} = {E.to_text(e)} uses {sorted(bad)} which are not new variables")
    for n in spec.forward:
        if split_jet(n)[1]:
            raise ChartError(f"new variable {n!r} looks like a derivative")
    return Chart(spec, independent, tuple(dependents))


def _sample_box(cfg: EqualityConfig, names) -> dict:
    return {n: cfg.interval(n) for n in names}


def verify_chart(chart: Chart, coset: Sequence[tuple], cfg: EqualityConfig | None = None) -> list:
    """Checks that the chart is invertible and rectifies each (field, target)."""
    cfg = cfg or EqualityConfig()
    checks = []
    for n, e in chart.forward.items():
        back = E.substitute(e, chart.inverse)
        checks.append(from_verdict(f"round trip {n}", E.equals_probabilistic(back, E.Var(n), cfg)))
    for o, e in chart.inverse.items():
        back = E.substitute(e, chart.forward)
        checks.append(from_verdict(f"round trip {o}", E.equals_probabilistic(back, E.Var(o), cfg)))
    J = chart.jacobian()
    olds = [chart.old_independent] + list(chart.old_dependents)
    sampler = E.PointSampler(olds, cfg, salt="jacobian")
    dets, retries = [], 0
    while len(dets) < cfg.trials:
        pt = sampler.floating()
        try:
            M = np.array([[E.evaluate(x, pt) for x in row] for row in J], dtype=float)
        except E.DomainError:
            retries += 1
            if retries > cfg.max_retries:
                raise E.SamplingExhausted("no valid sample point for the Jacobian") from None
            continue
        dets.append(float(np.linalg.det(M)))
    nonzero = [d for d in dets if abs(d) > 1e-10]
    checks.append(Check("jacobian nonzero", bool(nonzero),
                        f"nonzero at {len(nonzero)} of {len(dets)} points"))
    for Z, target in coset:
        for n, e in chart.forward.items():
            want = E.ONE if n == target else E.ZERO
            got = E.substitute(Z.apply(e), chart.inverse)
            checks.append(from_verdict(f"{Z.name}({n}) = {E.to_text(want)}",
                                       E.equals_probabilistic(got, want, cfg)))
    return checks


def transform_field(V: VectorField, chart: Chart) -> VectorField:
    """Push a point generator forward through the chart."""
    if V.order:
        raise ValueError("transform_field expects a point generator")
    comps = {}
    for n, e in chart.forward.items():
        c = E.tidy(E.simplify(E.substitute(V.apply(e), chart.inverse)))
        bad = c.free_vars - set(chart.forward)
        if bad:
            raise ChartError(f"component of {V.name} along {n} still mentions {sorted(bad)}")
        comps[n] = c
    xi = comps.pop(chart.new_independent)
    return VectorField(V.name, chart.new_independent, xi,
                       {k: v for k, v in comps.items() if not E.is_const(v, 0)})


# ---------------------------------------------------------------------------
# prolonged values on a solved system


def jet_values(indep: str, orders: dict, rhs: dict):
    """Closure mapping (dep, k) to the value of that jet on solutions.

    Below the top order a jet is itself; at the top it is the right-hand
    side; above it is the total derivative of the previous one with tops
    substituted.  Dependents missing from ``rhs`` are left symbolic.
    """
    tops = {jet_name(d, orders[d]): rhs[d] for d in rhs}
    memo = {}

    def value(dep: str, k: int) -> Expr:
        if dep not in rhs or k < orders[dep]:
            return E.Var(jet_name(dep, k))
        if k == orders[dep]:
            return rhs[dep]
        key = (dep, k)
        if key not in memo:
            prev = value(dep, k - 1)
            memo[key] = E.tidy(E.substitute(free_total_derivative(prev, indep), tops))
        return memo[key]

    return value


def on_shell(e: Expr, sys: OdeSystem, only_above_top: bool = False) -> Expr:
    """Replace every jet at or above a top order by its value on solutions."""
    value = jet_values(sys.independent, sys.orders, sys.rhs)
    bind = {}
    for v in e.free_vars:
        dep, k = split_jet(v)
        if dep in sys.orders:
            lim = sys.orders[dep] + (1 if only_above_top else 0)
            if k >= lim:
                bind[v] = value(dep, k)
    return E.substitute(e, bind)


def compare_with_residuals(sys: OdeSystem, residuals: Sequence[Expr],
                           cfg: EqualityConfig | None = None, label: str = "") -> list:
    """Checks that ``residuals = 0`` is the same system as ``sys``.

    Each residual must vanish on solutions of ``sys`` and the residuals must
    determine the top derivatives (nonsingular Jacobian in the tops).
    """
    cfg = cfg or EqualityConfig()
    pre = f"{label}: " if label else ""
    checks = [Check(f"{pre}equation count", len(residuals) == len(sys.dependents),
                    f"{len(residuals)} expected, {len(sys.dependents)} computed")]
    if not checks[0].passed:
        return checks
    for i, R in enumerate(residuals):
        checks.append(from_verdict(f"{pre}expected equation {i + 1} holds",
                                   E.is_zero(on_shell(R, sys), cfg), E.to_text(R) + " = 0"))
    tops = [sys.top(d) for d in sys.dependents]
    partial = [on_shell(R, sys, only_above_top=True) for R in residuals]
    J = [[E.differentiate(R, T) for T in tops] for R in partial]
    names = set(sys.coordinates())
    for row in J:
        for x in row:
            names |= x.free_vars
    sampler = E.PointSampler(names | set(tops), cfg, salt="residual-jacobian")
    tries = 0
    rank = None
    while rank is None:
        pt = sampler.floating()
        try:
            for d in sys.dependents:
                pt[sys.top(d)] = E.evaluate(sys.rhs[d], pt)
            M = np.array([[E.evaluate(x, pt) for x in row] for row in J], dtype=float)
            rank = int(np.linalg.matrix_rank(M)) if len(tops) else 0
        except E.DomainError:
            tries += 1
            if tries > cfg.max_retries:
                raise E.SamplingExhausted("no valid sample point for the residual Jacobian") from None
    checks.append(Check(f"{pre}expected equations determine {', '.join(tops)}",
                        rank == len(tops), f"rank {rank} of {len(tops)}"))
    return checks


# ---------------------------------------------------------------------------
# transforming and solving systems


@dataclass
class TransformResult:
    system: OdeSystem
    residuals: dict  # old dependent -> residual in new variables (cleared)
    old_jets: dict  # old jet name -> expression in new jets
    assignment: dict  # old dependent -> new dependent
    attempts: list


def _depends(e: Expr, v: str, cfg) -> bool:
    return E.depends_on(e, v, cfg)


def _high_jets(R: Expr, orders: dict, cfg) -> set:
    out = set()
    for v in R.free_vars:
        dep, k = split_jet(v)
        if dep in orders and k >= orders[dep] and _depends(R, v, cfg):
            out.add(v)
    return out


def _solve_single(R: Expr, T: str, cfg) -> Expr:
    a = E.tidy(E.differentiate(R, T))
    if T in a.free_vars and _depends(a, T, cfg):
        raise ArithmeticError(f"equation is not linear in {T}")
    if E.is_zero(a, cfg.strict()):
        raise ArithmeticError(f"equation does not involve {T}")
    b = E.tidy(E.substitute(R, {T: E.ZERO}))
    return E.tidy(E.simplify(E.neg(E.mul(b, E.power(a, E.MINUS_ONE)))))


def solve_for_tops(residuals: dict, assignment: dict, orders: dict, indep: str,
                   cfg: EqualityConfig) -> dict:
    """Solve residual equations for the assigned top derivatives.

    ``assignment`` maps residual key -> new dependent; ``orders`` gives each
    new dependent's order.  Returns dependent -> right-hand side.
    """
    tops = {b: jet_name(b, orders[b]) for b in orders}
    sol: dict = {}
    pending = dict(residuals)

    def reduce_excess(R):
        value = jet_values(indep, orders, sol)
        for _ in range(4):
            bind = {}
            for v in R.free_vars:
                dep, k = split_jet(v)
                if dep in sol and k >= orders[dep]:
                    bind[v] = value(dep, k)
            if not bind:
                return R
            R = E.tidy(E.substitute(R, bind))
        return R

    while pending:
        progress = False
        for a in list(pending):
            R = reduce_excess(pending[a])
            pending[a] = R
            b = assignment[a]
            high = _high_jets(R, orders, cfg)
            if high == {tops[b]}:
                sol[b] = _solve_single(R, tops[b], cfg)
                del pending[a]
                progress = True
            elif tops[b] not in high and not (high - set(tops.values())):
                raise ArithmeticError(f"equation for {b} does not involve {tops[b]}")
        if progress:
            continue
        keys = list(pending)
        wanted = [tops[assignment[a]] for a in keys]
        high = set().union(*(_high_jets(pending[a], orders, cfg) for a in keys))
        if high != set(wanted):
            raise ArithmeticError(
                f"cannot isolate {sorted(wanted)}: equations also involve {sorted(high - set(wanted))}")
        M, rhs = [], []
        for a in keys:
            R = pending[a]
            row = [E.tidy(E.differentiate(R, T)) for T in wanted]
            for x in row:
                if any(_depends(x, T, cfg) for T in wanted if T in x.free_vars):
                    raise ArithmeticError("equations are not linear in the top derivatives")
            M.append(row)
            rhs.append(E.neg(E.substitute(R, {T: E.ZERO for T in wanted})))
        try:
            vals = E.solve_linear_symbolic(M, rhs, cfg)
        except E.SingularSystemError as exc:
            raise ArithmeticError(f"top derivatives {wanted} cannot be solved: pivot {wanted[exc.column]} vanishes") from None
        for a, T, v in zip(keys, wanted, vals):
            sol[assignment[a]] = E.tidy(E.simplify(v))
            del pending[a]
    return sol


def _assignments(chart: Chart, sys: OdeSystem):
    """Candidate equation -> new-dependent matchings, most plausible first."""
    olds = list(sys.dependents)
    news = list(chart.new_dependents)
    hinted = {}
    for h in chart.spec.solve_for:
        d, k = split_jet(h)
        hinted[d] = k
    perms = []
    for perm in itertools.permutations(news, len(olds)):
        orders = {b: sys.orders[a] for a, b in zip(olds, perm)}
        if hinted and any(orders.get(d) != k for d, k in hinted.items()):
            continue
        score = sum(1 for a, b in zip(olds, perm) if b in chart.inverse[a].free_vars)
        perms.append((-score, perm))
    perms.sort(key=lambda x: (x[0], [news.index(b) for b in x[1]]))
    return [dict(zip(olds, p)) for _, p in perms]


def transform_system(sys: OdeSystem, chart: Chart, cfg: EqualityConfig | None = None) -> TransformResult:
    """Rewrite ``sys`` in the chart and bring it back to solved form."""
    cfg = cfg or EqualityConfig()
    if sys.has_algebraic():
        raise ValueError("eliminate algebraic relations before changing variables")
    if len(chart.new_dependents) != len(sys.dependents):
        raise ChartError("chart must have as many dependents as the system")
    s = chart.new_independent
    tau = chart.inverse[sys.independent]
    DT = E.tidy(free_total_derivative(tau, s))
    if E.is_zero(DT, cfg.strict()):
        raise DegenerateChartError(f"new independent {s} makes d{sys.independent}/d{s} vanish")
    inv_DT = E.power(DT, E.MINUS_ONE)
    old_jets = {sys.independent: tau}
    for a in sys.dependents:
        cur = chart.inverse[a]
        old_jets[a] = cur
        for k in range(1, sys.orders[a] + 1):
            cur = E.tidy(E.simplify(E.mul(free_total_derivative(cur, s), inv_DT)))
            old_jets[jet_name(a, k)] = cur
    residuals = {}
    for a in sys.dependents:
        n = sys.orders[a]
        bind = {v: old_jets[v] for v in sys.coordinates()}
        R = E.add(old_jets[jet_name(a, n)], E.neg(E.substitute(sys.rhs[a], bind)))
        residuals[a] = E.tidy(E.simplify(E.mul(R, E.power(DT, E.Const(2 * n - 1)))))
    attempts = []
    N = system_dimension(sys)
    for assign in _assignments(chart, sys):
        orders = {b: sys.orders[a] for a, b in assign.items()}
        try:
            sol = solve_for_tops(residuals, assign, orders, s, cfg)
        except (ArithmeticError, E.SamplingExhausted) as exc:
            attempts.append((assign, str(exc)))
            continue
        deps = [b for b in chart.new_dependents]
        new = OdeSystem(s, deps, orders, sol)
        assert system_dimension(new) == N
        ok = all(E.is_zero(on_shell(R, new), cfg) for R in residuals.values())
        if not ok:
            attempts.append((assign, "solution does not satisfy the transformed equations"))
            continue
        attempts.append((assign, "ok"))
        return TransformResult(new, residuals, old_jets, assign, attempts)
    detail = "; ".join(f"{a}: {msg}" for a, msg in attempts)
    raise ArithmeticError(f"no solved form found for chart {chart.name!r} ({detail})")


# ---------------------------------------------------------------------------
# restriction


@dataclass
class Quadrature:
    target: str
    integrand: Expr
    constant: str
    independent: str
    step: int
    raw: Expr | None = None

    def text(self) -> str:
        return f"{self.target} = integral({E.to_text(self.integrand)}) d{self.independent} + {self.constant}"

    def to_dict(self) -> dict:
        out = {"target": self.target, "integrand": E.to_text(self.integrand),
               "constant": self.constant, "independent": self.independent, "step": self.step}
        if self.raw is not None and self.raw != self.integrand:
            out["emitted"] = E.to_text(self.raw)
        return out


@dataclass
class CyclicReport:
    passed: bool
    offending: list  # (dependent, variable)


def check_cyclic(sys: OdeSystem, variables: Sequence[str], cfg: EqualityConfig | None = None) -> CyclicReport:
    cfg = cfg or EqualityConfig()
    bad = [(d, v) for d in sys.dependents for v in variables if _depends(sys.rhs[d], v, cfg)]
    return CyclicReport(not bad, bad)


@dataclass
class Restriction:
    system: OdeSystem
    quadratures: list
    names: dict  # old variable -> reduced variable (independent and first derivatives)
    dropped: list


def reduced_name(renames: dict, var: str) -> str:
    return renames.get(jet_name(var, 1), "d" + var)


def restrict(sys: OdeSystem, rectified: Sequence[str], renames: dict | None = None,
             cfg: EqualityConfig | None = None, first_constant: int = 1, step: int = 0) -> Restriction:
    """Drop the cyclic variables, keeping their first derivatives as new unknowns."""
    cfg = cfg or EqualityConfig()
    renames = dict(renames or {})
    cyc = check_cyclic(sys, rectified, cfg)
    if not cyc.passed:
        raise CyclicityError("right-hand sides depend on " +
                             ", ".join(f"{v} (equation for {d})" for d, v in cyc.offending))
    t = sys.independent
    new_t = renames.get(t, t)
    names = {t: new_t}
    bind = {}
    orders, deps = {}, []
    for d in sys.dependents:
        n = sys.orders[d]
        if d in rectified:
            if n < 1:
                raise CyclicityError(f"cannot restrict algebraic variable {d}")
            r = reduced_name(renames, d)
            names[jet_name(d, 1)] = r
            for k in range(1, n + 1):
                bind[jet_name(d, k)] = E.Var(jet_name(r, k - 1))
            bind[d] = E.ONE  # structurally present but cyclic
            deps.append(r)
            orders[r] = n - 1
        else:
            new = renames.get(d, d)
            for k in range(n + 1):
                bind[jet_name(d, k)] = E.Var(jet_name(new, k))
            names[d] = new
            deps.append(new)
            orders[new] = n
    bind[t] = E.Var(new_t)
    if len(set(deps) | {new_t}) != len(deps) + 1:
        raise ValueError(f"reduced names collide: {deps + [new_t]}")
    rhs = {}
    for d in sys.dependents:
        target = names[jet_name(d, 1)] if d in rectified else names[d]
        rhs[target] = E.tidy(E.substitute(sys.rhs[d], bind))
    quads = []
    for i, d in enumerate(rectified):
        v = E.Var(names[jet_name(d, 1)])
        quads.append(Quadrature(d, v, f"c{first_constant + i}", new_t, step, v))
    return Restriction(OdeSystem(new_t, deps, orders, rhs), quads, names, list(rectified))


def reduce_generator(Zt: VectorField, restriction: Restriction, chart_deps: Sequence[str],
                     cfg: EqualityConfig | None = None):
    """Reduced form of a transformed generator; returns (field, checks)."""
    cfg = cfg or EqualityConfig()
    rect = restriction.dropped
    Zp = prolong(Zt, {d: (1 if d in rect else 0) for d in chart_deps})
    comps = Zp.components()
    t = Zt.independent
    coords = [t] + [jet_name(d, 1) if d in rect else d for d in chart_deps]
    checks = []
    for c in coords:
        val = comps.get(c, E.ZERO)
        for d in rect:
            dep = _depends(val, d, cfg)
            checks.append(Check(f"{Zt.name}: component along {c} free of {d}", not dep))
    bind = {}
    for old, new in restriction.names.items():
        bind[old] = E.Var(new)
    for d in rect:
        bind[d] = E.ONE
    new_t = restriction.names[t]
    xi = E.tidy(E.substitute(comps.get(t, E.ZERO), bind))
    eta = {}
    for c in coords[1:]:
        val = E.tidy(E.substitute(comps.get(c, E.ZERO), bind))
        if not E.is_const(val, 0):
            eta[restriction.names[c]] = val
    return VectorField(Zt.name, new_t, xi, eta), checks


@dataclass
class Elimination:
    system: OdeSystem
    relations: dict  # eliminated variable -> expression


def eliminate_algebraic(sys: OdeSystem, cfg: EqualityConfig | None = None) -> Elimination:
    """Substitute order-0 relations ``v = G`` (G free of v) into the rest."""
    cfg = cfg or EqualityConfig()
    relations = {}
    rhs = dict(sys.rhs)
    orders = dict(sys.orders)
    deps = list(sys.dependents)
    for v in [d for d in sys.dependents if sys.orders[d] == 0]:
        G = rhs[v]
        if _depends(G, v, cfg):
            continue
        relations[v] = G
        deps.remove(v)
        del orders[v], rhs[v]
        partial = OdeSystem(sys.independent, [v], {v: 0}, {v: G})
        for d in deps:
            rhs[d] = E.tidy(E.simplify(on_shell(rhs[d], partial)))
        for w in list(relations):
            relations[w] = E.tidy(on_shell(relations[w], partial)) if w != v else G
    return Elimination(OdeSystem(sys.independent, deps, orders, rhs), relations)


# ---------------------------------------------------------------------------
# session state


@dataclass
class GeneratorState:
    field: VectorField
    origin: list  # coordinates over the original basis


@dataclass
class StepReport:
    index: int
    chart: str
    coset: list
    checks: list
    system_before: OdeSystem
    transformed: OdeSystem | None = None
    restricted: OdeSystem | None = None
    system_after: OdeSystem | None = None
    relations: dict = field(default_factory=dict)
    quadratures: list = field(default_factory=list)
    survivors: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    transformed_fields: dict = field(default_factory=dict)
    reduced_fields: dict = field(default_factory=dict)
    old_jets: dict = field(default_factory=dict)
    autonomy: list = field(default_factory=list)
    dimension_before: int = 0
    dimension_after: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        out = {
            "index": self.index, "chart": self.chart, "coset": list(self.coset),
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "dimension_before": self.dimension_before,
            "dimension_after": self.dimension_after,
            "system_before": system_to_dict(self.system_before),
            "survivors": list(self.survivors), "dropped": list(self.dropped),
            "quadratures": [q.to_dict() for q in self.quadratures],
            "autonomy": list(self.autonomy),
        }
        for key in ("transformed", "restricted", "system_after"):
            val = getattr(self, key)
            if val is not None:
                out[key] = system_to_dict(val)
        if self.relations:
            out["relations"] = {k: E.to_text(v) for k, v in self.relations.items()}
        if self.transformed_fields:
            out["transformed_fields"] = {k: v.text() for k, v in self.transformed_fields.items()}
        if self.reduced_fields:
            out["reduced_fields"] = {k: v.text() for k, v in self.reduced_fields.items()}
        return out


def system_to_dict(sys: OdeSystem) -> dict:
    return {"independent": sys.independent,
            "dependents": [{"name": d, "order": sys.orders[d], "rhs": E.to_text(sys.rhs[d])}
                           for d in sys.dependents]}


def system_from_dict(d: dict) -> OdeSystem:
    deps = [x["name"] for x in d["dependents"]]
    return OdeSystem(d["independent"], deps, {x["name"]: x["order"] for x in d["dependents"]},
                     {x["name"]: parse_expression(x["rhs"]) for x in d["dependents"]})


@dataclass
class SessionState:
    step: int
    system: OdeSystem
    generators: list  # GeneratorState
    constants: A.StructureConstants  # over current generator names
    plan: list  # remaining cosets: lists of rows over current generators
    original: A.StructureConstants
    dimension: int  # of the original system
    consumed: list = field(default_factory=list)  # rows over the original basis
    quadratures: list = field(default_factory=list)
    relations: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    autonomy: int = 0

    @property
    def labels(self) -> list:
        return [g.field.name for g in self.generators]

    def predicted(self) -> int:
        return self.dimension - len(self.consumed) + self.autonomy

    def to_dict(self) -> dict:
        return {
            "version": SESSION_VERSION,
            "step": self.step,
            "dimension": self.dimension,
            "autonomy": self.autonomy,
            "system": system_to_dict(self.system),
            "generators": [{"name": g.field.name, "independent": g.field.independent,
                            "xi": E.to_text(g.field.xi),
                            "eta": {k: E.to_text(v) for k, v in g.field.eta.items()},
                            "origin": [str(x) for x in g.origin]} for g in self.generators],
            "constants": _constants_to_dict(self.constants),
            "original": _constants_to_dict(self.original),
            "plan": [[[str(x) for x in row] for row in coset] for coset in self.plan],
            "consumed": [[str(x) for x in row] for row in self.consumed],
            "quadratures": [q.to_dict() | {"raw": E.to_text(q.raw if q.raw is not None else q.integrand)}
                            for q in self.quadratures],
            "relations": {k: E.to_text(v) for k, v in self.relations.items()},
            "reports": [r if isinstance(r, dict) else r.to_dict() for r in self.reports],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionState":
        if d.get("version") != SESSION_VERSION:
            raise ValueError(f"unsupported session version {d.get('version')!r}")
        gens = []
        for g in d["generators"]:
            V = VectorField(g["name"], g["independent"], parse_expression(g["xi"]),
                            {k: parse_expression(v) for k, v in g["eta"].items()})
            gens.append(GeneratorState(V, [Fraction(x) for x in g["origin"]]))
        quads = [Quadrature(q["target"], parse_expression(q["integrand"]), q["constant"],
                            q["independent"], q["step"], parse_expression(q["raw"]))
                 for q in d["quadratures"]]
        return cls(d["step"], system_from_dict(d["system"]), gens,
                   _constants_from_dict(d["constants"]),
                   [[[Fraction(x) for x in row] for row in c] for c in d["plan"]],
                   _constants_from_dict(d["original"]), d["dimension"],
                   [[Fraction(x) for x in row] for row in d["consumed"]], quads,
                   {k: parse_expression(v) for k, v in d["relations"].items()},
                   list(d["reports"]), d.get("autonomy", 0))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SessionState":
        return cls.from_dict(json.loads(text))


def _constants_to_dict(C: A.StructureConstants) -> dict:
    return {"labels": list(C.labels),
            "brackets": [[a, b, {k: str(v) for k, v in combo.items()}]
                         for (a, b), combo in C.brackets().items()]}


def _constants_from_dict(d: dict) -> A.StructureConstants:
    return A.StructureConstants.from_brackets(
        d["labels"], {(a, b): {k: Fraction(v) for k, v in combo.items()} for a, b, combo in d["brackets"]})


def initial_state(problem: ProblemDescription, cfg: EqualityConfig | None = None,
                  constants: A.StructureConstants | None = None) -> SessionState:
    """Session at step 0: constants, plan and an adapted generator basis."""
    cfg = cfg or EqualityConfig()
    sys = problem.system()
    fields = list(problem.generators)
    C = constants if constants is not None else A.structure_constants(fields, cfg)
    plan = A.reduction_chain(C, system_dimension(sys))
    r = C.dim
    gens = [GeneratorState(V, A.unit(r, i)) for i, V in enumerate(fields)]
    cosets = [[list(row) for row in step.members.rows] for step in plan.steps]
    return SessionState(0, sys, gens, C, cosets, C, system_dimension(sys))


def _coset_fields(state: SessionState, rows) -> list:
    fields = [g.field for g in state.generators]
    out = []
    for row in rows:
        name = A.vector_text(row, state.labels)
        out.append(combine(fields, row, name) if sum(1 for x in row if x) > 1 or
                   any(x not in (0, 1) for x in row) else fields[row.index(1)])
    return out


def run_step(state: SessionState, spec: ChartSpec, cfg: EqualityConfig | None = None) -> SessionState:
    """One reduction step; raises StepFailed with the collected checks."""
    cfg = cfg or EqualityConfig()
    idx = state.step + 1
    checks: list = []

    def abort(msg):
        raise StepFailed(f"step {idx} ({spec.name}): {msg}", checks, idx)

    if not state.plan:
        abort("no coset left in the plan")
    if state.system.has_algebraic():
        abort("system still has algebraic relations")
    labels = state.labels
    coset_rows = state.plan[0]
    C = state.constants
    # rectify combinations over current generator names
    targets = []
    chart_rows = []
    for combo, target in spec.rectify:
        unknown = set(combo) - set(labels)
        if unknown:
            checks.append(Check("rectify names are current generators", False,
                                f"unknown {sorted(unknown)}; current {labels}"))
            abort("chart names unknown generators")
        chart_rows.append([Fraction(combo.get(l, 0)) for l in labels])
        targets.append(target)
    same = (len(chart_rows) == len(coset_rows) and L.rank(chart_rows) == len(chart_rows)
            and L.rank(chart_rows + coset_rows) == len(coset_rows))
    coset_names = [A.vector_text(row, labels) for row in coset_rows]
    checks.append(Check("chart rectifies the next coset", same,
                        f"coset {coset_names}, chart {[A.vector_text(x, labels) for x in chart_rows]}"))
    if not same:
        abort("chart does not rectify the next coset")
    abelian = all(not any(C.bracket(a, b)) for a, b in itertools.combinations(chart_rows, 2))
    checks.append(Check("coset is Abelian", abelian))
    if not abelian:
        abort("coset is not Abelian")
    coset_fields = _coset_fields(state, chart_rows)
    sys = state.system
    auto_targets = [t for t in targets if t == spec.new_independent]
    if auto_targets:
        subspace = [sys.independent] + list(sys.dependents)
    else:
        subspace = list(sys.dependents)
    tr = A.transitivity_check(coset_fields, subspace, cfg)
    checks.append(Check(f"coset acts transitively on ({', '.join(subspace)})", tr.transitive,
                        f"generic ranks {tr.ranks}, need {tr.needed}"))
    if not tr.transitive:
        abort("coset does not act transitively")
    try:
        chart = make_chart(spec, sys.independent, sys.dependents)
    except ChartError as exc:
        checks.append(Check("chart variables", False, str(exc)))
        abort(str(exc))
    checks += verify_chart(chart, list(zip(coset_fields, targets)), cfg)
    if not all(c.passed for c in checks):
        abort("chart verification failed")
    # survivors: the remaining cosets, in plan order
    surv_rows = [row for coset in state.plan[1:] for row in coset]
    kept_rows, dropped = [], []
    for row in surv_rows:
        name = A.vector_text(row, labels)
        ok = A.check_inheritance_rows(C, chart_rows, row)
        checks.append(Check(f"{name} inherits (brackets with the coset stay in the coset)", ok))
        (kept_rows if ok else dropped).append(row)
    surv_fields = _coset_fields(state, kept_rows)
    transformed = transform_system(sys, chart, cfg)
    new_sys = transformed.system
    tf = {}
    for Z, tgt in zip(coset_fields, targets):
        Zt = transform_field(Z, chart)
        tf[Z.name] = Zt
        want = VectorField(Z.name, chart.new_independent,
                           E.ONE if tgt == chart.new_independent else E.ZERO,
                           {} if tgt == chart.new_independent else {tgt: E.ONE})
        ok, bad = fields_equal(Zt, want, cfg)
        checks.append(Check(f"{Z.name} becomes d/d{tgt}", ok, "" if ok else f"component {bad[0]}"))
    for Z in surv_fields:
        tf[Z.name] = transform_field(Z, chart)
    rect = [t for t in targets if t != chart.new_independent]
    cyc = check_cyclic(new_sys, rect + auto_targets, cfg)
    checks.append(Check(f"transformed system free of {', '.join(rect + auto_targets)}", cyc.passed,
                        "; ".join(f"{d} depends on {v}" for d, v in cyc.offending)))
    if not cyc.passed:
        abort("transformed system is not cyclic in the rectified variables")
    first_c = len(state.quadratures) + 1
    restriction = restrict(new_sys, rect, spec.renames, cfg, first_c, idx)
    reduced = {}
    new_fields = []
    for Z in surv_fields:
        Y, cks = reduce_generator(tf[Z.name], restriction, chart.new_dependents, cfg)
        checks += cks
        reduced[Z.name] = Y
        new_fields.append(Y)
    # bracket relations of the survivors modulo the consumed coset
    k = len(kept_rows)
    if k:
        expected = A.quotient_constants(C, kept_rows, chart_rows, [Y.name for Y in new_fields])
        for a, b in itertools.combinations(range(k), 2):
            br = commutator(new_fields[a], new_fields[b])
            want = combine(new_fields, [expected.C[l, a, b] for l in range(k)], "expected")
            ok, bad = fields_equal(br, want, cfg)
            checks.append(Check(f"[{new_fields[a].name},{new_fields[b].name}] matches the structure constants",
                                ok, "" if ok else f"component {bad[0]}"))
    else:
        expected = A.StructureConstants.zeros([])
    restricted = restriction.system
    final = restricted
    relations = {}
    if restricted.has_algebraic():
        elim = eliminate_algebraic(restricted, cfg)
        final, relations = elim.system, elim.relations
        for q in restriction.quadratures:
            q.integrand = E.tidy(E.substitute(q.integrand, relations))
        new_fields = [VectorField(Y.name, Y.independent, Y.xi,
                                  {v: c for v, c in Y.eta.items() if v not in relations})
                      for Y in new_fields]
    if not final.has_algebraic() and final.dependents:
        for Y in new_fields:
            rep = check_symmetry(Y, final, cfg)
            checks.append(Check(f"{Y.name} is a symmetry of the reduced system", rep.passed,
                                rep.reason or ", ".join(v for v, _ in rep.failing())))
    report = StepReport(idx, spec.name, coset_names, checks, sys, new_sys, restricted, final,
                        relations, restriction.quadratures, [Y.name for Y in new_fields],
                        [A.vector_text(x, labels) for x in dropped], tf, reduced,
                        {k2: v for k2, v in transformed.old_jets.items()},
                        [Z.name for Z, t in zip(coset_fields, targets) if t == chart.new_independent],
                        system_dimension(sys), system_dimension(final))
    if not report.passed:
        abort("post-step verification failed")
    # next state: surviving generators with unit coordinates, remaining plan re-indexed
    by_row = {tuple(row): i for i, row in enumerate(kept_rows)}
    new_plan = []
    for coset in state.plan[1:]:
        rows = []
        for row in coset:
            if tuple(row) in by_row:
                rows.append(A.unit(k, by_row[tuple(row)]))
        if rows:
            new_plan.append(rows)
    def origin(row):
        out = [Fraction(0)] * state.original.dim
        for c, g in zip(row, state.generators):
            for i, x in enumerate(g.origin):
                out[i] += c * x
        return out
    new_gens = [GeneratorState(Y, origin(row)) for Y, row in zip(new_fields, kept_rows)]
    consumed = state.consumed + [origin(row) for row in chart_rows]
    return SessionState(idx, final, new_gens, expected, new_plan, state.original, state.dimension,
                        consumed, state.quadratures + restriction.quadratures,
                        dict(state.relations) | relations, state.reports + [report],
                        state.autonomy + len(report.autonomy))


@dataclass
class ChainReport:
    state: SessionState
    residual_dimension: int
    predicted: int
    certificate: A.SolvableCertificate
    steps: list

    @property
    def passed(self) -> bool:
        return (self.residual_dimension == self.predicted and self.certificate.ok
                and all(s.passed for s in self.steps if isinstance(s, StepReport)))

    def to_dict(self) -> dict:
        st = self.state
        return {
            "passed": self.passed,
            "residual_dimension": self.residual_dimension,
            "predicted_dimension": self.predicted,
            "final_system": system_to_dict(st.system),
            "relations": {k: E.to_text(v) for k, v in st.relations.items()},
            "quadratures": [q.to_dict() for q in st.quadratures],
            "consumed": [A.vector_text(v, st.original.labels) for v in st.consumed],
            "certificate": {"span_dim": self.certificate.span_dim, "closed": self.certificate.closed,
                            "level": self.certificate.level, "solvable": self.certificate.ok},
            "remaining_plan": len(st.plan),
            "steps": [s.to_dict() if isinstance(s, StepReport) else s for s in self.steps],
            "note": "whole cosets are consumed at each step",
        }


def run_chain(state: SessionState, charts: Sequence[ChartSpec], cfg: EqualityConfig | None = None) -> ChainReport:
    cfg = cfg or EqualityConfig()
    for spec in charts:
        state = run_step(state, spec, cfg)
    cert = A.solvable_span_certificate(state.original, state.consumed)
    return ChainReport(state, system_dimension(state.system), state.predicted(), cert,
                       list(state.reports))
