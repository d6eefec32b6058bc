"""End-to-end check of the bundled worked example against golden expressions."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import _linalg as L
from . import algebra as A
from . import expr as E
from .expr import EqualityConfig
from .jet import VectorField, check_symmetry, fields_equal, system_dimension
from .parser import parse_chart, parse_problem
from .reduce import (StepReport, compare_with_residuals, initial_state,
                     run_chain, run_step)
from .report import Check, StepFailed, from_verdict

PROBLEM = "coupled.problem"
EXPECT = "coupled.expect"
STEP1 = "step1.chart"
BRANCHES = ("branch_a.chart", "branch_b.chart")
SO21 = "so21.problem"
INTRANSITIVE = "intransitive.problem"


def fixture_dir() -> Path:
    return Path(str(resources.files("liereduce") / "fixtures"))


def read_fixture(name: str, directory: Path | None = None) -> str:
    return ((directory or fixture_dir()) / name).read_text(encoding="utf-8")


@dataclass
class GoldenRun:
    checks: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self):
        return next((c for c in self.checks if not c.passed), None)


def _stage_view(report: StepReport, kind: str):
    return {"system": report.transformed, "reduced": report.restricted,
            "final": report.system_after}.get(kind)


def check_expectations(stage: str, report: StepReport, expectations, cfg) -> list:
    """Compare one step's outputs with every ``stage.*`` expectation."""
    checks = []
    eqs: dict = {}
    for ex in expectations:
        head, _, rest = ex.label.partition(".")
        if head != stage:
            continue
        kind, _, name = rest.partition(".")
        if ex.kind == "equation" and kind in ("system", "reduced", "final"):
            eqs.setdefault(kind, []).append(ex.value)
        elif ex.kind == "equation" and kind == "quadrature":
            q = next((q for q in report.quadratures if q.target == name), None)
            if q is None:
                checks.append(Check(f"{ex.label} emitted", False))
                continue
            got = q.raw if q.raw is not None else q.integrand
            checks.append(from_verdict(f"{ex.label}", E.equals_probabilistic(got, ex.value, cfg),
                                       f"{q.target} = integral({E.to_text(got)})"))
        elif ex.kind == "equation" and kind == "jets":
            got = report.old_jets.get(name)
            if got is None:
                checks.append(Check(f"{ex.label} computed", False))
                continue
            checks.append(from_verdict(ex.label, E.equals_probabilistic(got, ex.value, cfg),
                                       f"{name} = {E.to_text(got)}"))
        elif ex.kind == "field" and kind in ("transformed", "reduced"):
            pool = report.transformed_fields if kind == "transformed" else report.reduced_fields
            got = pool.get(name)
            if got is None:
                checks.append(Check(f"{ex.label} computed", False))
                continue
            comps = dict(ex.value)
            xi = comps.pop(got.independent, E.ZERO)
            want = VectorField(name, got.independent, xi, comps)
            ok, bad = fields_equal(got, want, cfg)
            checks.append(Check(ex.label, ok, got.text() if ok else f"{got.text()} differs along {bad[0]}",
                                probabilistic=True))
        else:
            checks.append(Check(f"{ex.label} understood", False, "unknown expectation label"))
    for kind, residuals in eqs.items():
        sys = _stage_view(report, kind)
        if sys is None:
            checks.append(Check(f"{stage}.{kind} computed", False))
            continue
        checks += compare_with_residuals(sys, residuals, cfg, f"{stage}.{kind}")
    return checks


def verify_bundled_example(directory: Path | None = None, cfg: EqualityConfig | None = None,
                           budget: int = 1000) -> GoldenRun:
    cfg = cfg or EqualityConfig()
    run = GoldenRun()
    add = run.checks.extend
    problem = parse_problem(read_fixture(PROBLEM, directory))
    cfg = cfg.with_box(problem.box)
    expect = parse_problem(read_fixture(EXPECT, directory)).expectations
    sys = problem.system()

    # symmetry condition
    sym = []
    for Z in problem.generators:
        rep = check_symmetry(Z, sys, cfg)
        sym.append(Check(f"check: {Z.name} is a symmetry", rep.passed,
                         f"lambda = {E.to_text(rep.lam)}" + ("" if rep.passed else
                                                             f"; fails along {[v for v, _ in rep.failing()]}"),
                         rep.failing()[0][1].witness if rep.failing() else None, True))
    add(sym)
    run.sections["check"] = [c.to_dict() for c in sym]
    if not all(c.passed for c in sym):
        return run

    # algebra
    C = A.structure_constants(problem.generators, cfg)
    spec = problem.structures.get(None)
    alg = []
    if spec is not None:
        want = A.StructureConstants.from_brackets(spec.basis, spec.brackets)
        alg.append(Check("algebra: structure constants equal the stated brackets", C == want,
                         "; ".join(C.text_lines())))
    alg.append(Check("algebra: axioms", A.verify_algebra_axioms(C).passed))
    series = A.derived_series(C)
    level = A.solvability_level(C)
    alg.append(Check("algebra: solvable of level 2", level == 2, f"level {level}"))
    g1 = series.terms[1].names(C.labels) if len(series.terms) > 1 else []
    alg.append(Check("algebra: g(1) = span{Z1, Z2}", L.row_space(series.terms[1].as_lists(), 3) ==
                     L.row_space([A.unit(3, 0), A.unit(3, 1)], 3), f"g(1) basis {g1}"))
    add(alg)
    run.sections["algebra"] = [c.to_dict() for c in alg]

    # plan
    N = system_dimension(sys)
    plan = A.reduction_chain(C, N)
    names = plan.names()
    tr = A.transitivity_check([problem.generator(n) for n in names[0]], sys.dependents, cfg)
    pl = [Check("plan: cosets [{Z1, Z2}, {Z3}]", names == [["Z1", "Z2"], ["Z3"]], str(names)),
          Check("plan: N = 5, r = 3, predicted 2", (N, plan.r, plan.predicted) == (5, 3, 2),
                f"N = {N}, r = {plan.r}, predicted {plan.predicted}"),
          Check("plan: first coset transitive on (x, y)", tr.transitive, f"ranks {tr.ranks}")]
    add(pl)
    run.sections["plan"] = [c.to_dict() for c in pl]

    # chains
    state0 = initial_state(problem, cfg, C)
    try:
        state1 = run_step(state0, parse_chart(read_fixture(STEP1, directory)), cfg)
    except StepFailed as exc:
        add(exc.checks or [Check("step1", False, str(exc))])
        return run
    s1 = check_expectations("step1", state1.reports[-1], expect, cfg)
    add(s1)
    run.sections["step1"] = [c.to_dict() for c in s1]
    for fname in BRANCHES:
        stage = fname.split(".")[0]
        spec = parse_chart(read_fixture(fname, directory))
        try:
            chain = run_chain(state1, [spec], cfg)
        except StepFailed as exc:
            add(exc.checks or [Check(stage, False, str(exc))])
            continue
        cks = check_expectations(stage, chain.state.reports[-1], expect, cfg)
        cks.append(Check(f"{stage}: residual dimension equals predicted",
                         chain.residual_dimension == chain.predicted == 2,
                         f"residual {chain.residual_dimension}, predicted {chain.predicted}"))
        cks.append(Check(f"{stage}: consumed generators span a solvable subalgebra", chain.certificate.ok,
                         f"dimension {chain.certificate.span_dim}, level {chain.certificate.level}"))
        cks.append(Check(f"{stage}: three quadratures", len(chain.state.quadratures) == 3,
                         "; ".join(q.text() for q in chain.state.quadratures)))
        add(cks)
        run.sections[stage] = [c.to_dict() for c in cks]

    # the non-solvable algebra and its better basis
    so = parse_problem(read_fixture(SO21, directory))
    M = A.StructureConstants.from_brackets(so.structures[None].basis, so.structures[None].brackets)
    tilted = so.structures["tilted"]
    Q = A.matrix_from_combos(so.changes["tilted"], M.labels, tilted.basis)
    T3 = A.change_basis(M, L.inverse(Q), tilted.basis)
    found = A.search_max_solvable(M, budget=budget, seed=0)
    ns = [Check("so21: not solvable", A.solvability_level(M) is None),
          Check("so21: basis change gives the stated brackets",
                T3 == A.StructureConstants.from_brackets(tilted.basis, tilted.brackets), "; ".join(T3.text_lines())),
          Check("so21: solvable subalgebra of dimension >= 2 found", found.dim >= 2,
                f"dimension {found.dim} after {found.trials} trials")]
    add(ns)
    run.sections["so21"] = [c.to_dict() for c in ns]

    it = parse_problem(read_fixture(INTRANSITIVE, directory))
    rep = A.transitivity_check(it.generators, [it.independent] + it.dependents, cfg)
    tc = [Check("transitivity: {d/ds, t*d/ds} intransitive on (t, s)", not rep.transitive,
                f"ranks {rep.ranks}")]
    add(tc)
    run.sections["transitivity"] = [c.to_dict() for c in tc]
    return run
