"""Command-line interface.

Exit codes: 0 every check passed, 1 a check failed, 2 parse or usage
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

from . import __version__
from . import algebra as A
from . import expr as E
from .expr import EqualityConfig
from .golden import verify_bundled_example
from .jet import check_symmetry, system_dimension
from .parser import ParseError, parse_chart, parse_problem
from .reduce import (ChartError, SessionState, initial_state, run_chain, run_step)
from .report import Check, StepFailed

SCHEMA = "liereduce-report/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Report:
    def __init__(self, command: str, args):
        self.command = command
        self.args = args
        self.checks: list = []
        self.result: dict = {}
        self.lines: list = []
        self.started = time.perf_counter()

    def add(self, check: Check):
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "tool": "liereduce",
            "version": __version__,
            "command": self.command,
            "seed": self.args.seed,
            "trials": self.args.trials,
            "rel_tol": repr(self.args.rel_tol),
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "result": self.result,
        }
        if self.args.timing:
            out["elapsed_seconds"] = round(time.perf_counter() - self.started, 6)
        return out

    def render(self, fmt: str) -> str:
        if fmt == "structured":
            return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        out = [f"liereduce {self.command}"]
        out += self.lines
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            extra = f"  ({c.detail})" if c.detail else ""
            out.append(f"  [{mark}] {c.name}{extra}")
            if not c.passed and c.witness:
                pt = ", ".join(f"{k}={v!r}" for k, v in sorted(c.witness.items()))
                out.append(f"         witness: {pt}")
        out.append("result: " + ("pass" if self.passed else "FAIL"))
        if self.args.timing:
            out.append(f"elapsed: {time.perf_counter() - self.started:.3f} s")
        return "\n".join(out) + "\n"


def _config(args) -> EqualityConfig:
    try:
        return EqualityConfig(trials=args.trials, rel_tol=args.rel_tol, abs_tol=args.abs_tol, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_problem(path: str):
    return parse_problem(_read(path))


def _constants(problem, cfg):
    """Constants from the generators, else from the structure block."""
    if problem.generators:
        return A.structure_constants(problem.generators, cfg)
    spec = problem.structures.get(None)
    if spec is None:
        raise UsageError("problem has neither generators nor a structure block")
    return A.StructureConstants.from_brackets(spec.basis, spec.brackets)


def _constants_dict(C: A.StructureConstants) -> dict:
    return {"basis": list(C.labels),
            "brackets": {f"[{a},{b}]": A.combo_text(combo) for (a, b), combo in C.brackets().items()}}


def cmd_check(args, rep: Report):
    problem = _load_problem(args.problem)
    cfg = _config(args).with_box(problem.box)
    sys_ = problem.system()
    res = {}
    for Z in problem.generators:
        r = check_symmetry(Z, sys_, cfg)
        bad = r.failing()
        rep.add(Check(f"{Z.name} is a symmetry", r.passed,
                      f"lambda = {E.to_text(r.lam)}" + (f"; fails along {[v for v, _ in bad]}" if bad else "")
                      + (f"; {r.reason}" if r.reason else ""),
                      bad[0][1].witness if bad else None, True,
                      {"lhs": bad[0][1].lhs, "rhs": bad[0][1].rhs} if bad and bad[0][1].lhs is not None else {}))
        res[Z.name] = {"passed": r.passed, "lambda": E.to_text(r.lam)}
        rep.lines.append(f"  {Z.name}: {Z.text()}")
    rep.result = {"generators": res, "dimension": system_dimension(sys_)}


def cmd_algebra(args, rep: Report):
    problem = _load_problem(args.problem)
    cfg = _config(args).with_box(problem.box)
    try:
        C = _constants(problem, cfg)
    except A.NotClosedError as exc:
        rep.add(Check("algebra closes", False, f"[{exc.pair[0]},{exc.pair[1]}] is not a constant combination"))
        rep.result = {"not_closed": list(exc.pair)}
        return
    except A.DependentBasisError as exc:
        rep.add(Check("generators independent", False, str(exc)))
        return
    ax = A.verify_algebra_axioms(C)
    rep.add(Check("antisymmetry", not ax.antisymmetry, f"violations {ax.antisymmetry}" if ax.antisymmetry else ""))
    rep.add(Check("Jacobi identity", not ax.jacobi, f"violations {ax.jacobi}" if ax.jacobi else ""))
    rep.add(Check("trace property", not ax.trace, f"violations {ax.trace}" if ax.trace else ""))
    spec = problem.structures.get(None)
    if spec is not None and problem.generators:
        want = A.StructureConstants.from_brackets(spec.basis, spec.brackets)
        rep.add(Check("constants equal the structure block", C == want))
    series = A.derived_series(C)
    level = A.solvability_level(C)
    result = {"constants": _constants_dict(C), "derived_dims": series.dims(),
              "series_end": series.terminal, "level": level,
              "derived": [t.names(C.labels) for t in series.terms]}
    rep.lines += ["  " + line for line in C.text_lines()] or ["  abelian: all brackets vanish"]
    rep.lines.append(f"  derived series dimensions {series.dims()} ({series.terminal})")
    rep.lines.append(f"  solvability level: {level if level is not None else 'not solvable'}")
    if level is not None:
        cs = A.cosets(series, C.dim)
        chain = [c.names(C.labels) for c in reversed(cs)]
        result["chain"] = chain
        rep.lines.append(f"  coset chain: {chain}")
    rad = A.killing_radical(C)
    found = A.search_max_solvable(C, budget=args.budget, seed=args.seed)
    result["radical_dim"] = rad.dim
    result["max_solvable"] = {"dim": found.dim, "level": found.level, "trials": found.trials,
                              "basis": found.basis.names(C.labels), "lower_bound": True}
    rep.lines.append(f"  radical dimension {rad.dim}; solvable subalgebra found of dimension {found.dim} "
                     f"{found.basis.names(C.labels)}")
    for name, rows in problem.changes.items():
        target = problem.structures.get(name)
        new_labels = target.basis if target else sorted({n for r in rows.values() for n in r})
        Q = A.matrix_from_combos(rows, C.labels, new_labels)
        from . import _linalg as L
        try:
            P = L.inverse(Q)
        except ZeroDivisionError:
            rep.add(Check(f"basis change {name} invertible", False))
            continue
        C2 = A.change_basis(C, P, new_labels)
        result.setdefault("changes", {})[name] = _constants_dict(C2)
        rep.lines.append(f"  basis change {name}: " + "; ".join(C2.text_lines()))
        if target is not None:
            rep.add(Check(f"basis change {name} gives its structure block",
                          C2 == A.StructureConstants.from_brackets(target.basis, target.brackets)))
    rep.result = result


def cmd_plan(args, rep: Report):
    problem = _load_problem(args.problem)
    cfg = _config(args).with_box(problem.box)
    C = _constants(problem, cfg)
    sys_ = problem.system() if problem.independent else None
    N = system_dimension(sys_) if sys_ else None
    try:
        plan = A.reduction_chain(C, N)
    except A.NotSolvableError as exc:
        rep.add(Check("algebra is solvable", False, str(exc)))
        return
    rep.add(Check("algebra is solvable", True))
    steps = []
    for i, st in enumerate(plan.steps):
        entry = {"coset": st.names, "level": st.level, "abelian": st.abelian,
                 "abelian_modulo_deeper": st.abelian_mod_deeper}
        rep.add(Check(f"coset {st.names} abelian modulo the deeper derived algebra", st.abelian_mod_deeper))
        if i == 0 and sys_ is not None and problem.generators:
            fields = [problem.generator(n) if n in C.labels else None for n in st.names]
            if None in fields:
                from .jet import combine
                fields = [combine(problem.generators, row, A.vector_text(row, C.labels))
                          for row in st.members.as_lists()]
            tr = A.transitivity_check(fields, sys_.dependents, cfg)
            entry["transitive"] = tr.transitive
            rep.add(Check(f"coset {st.names} acts transitively on ({', '.join(sys_.dependents)})",
                          tr.transitive, f"generic ranks {tr.ranks}, need {tr.needed}"))
        else:
            entry["transitive"] = "checked when the step runs"
        steps.append(entry)
        rep.lines.append(f"  step {i + 1}: coset {st.names}")
    rep.result = {"steps": steps, "N": N, "r": plan.r, "predicted": plan.predicted,
                  "note": "whole cosets are consumed; splitting a coset is not attempted"}
    rep.lines.append(f"  N = {N}, r = {plan.r}, predicted residual dimension {plan.predicted}")


def _step_result(rep: Report, state: SessionState):
    last = state.reports[-1] if state.reports else None
    if last is not None and not isinstance(last, dict):
        rep.checks += last.checks
        rep.lines.append(f"  step {last.index} ({last.chart}): coset {last.coset}")
        rep.lines += ["    " + line for line in last.system_after.equations_text()]
        for q in last.quadratures:
            rep.lines.append("    " + q.text())
        for k, v in last.relations.items():
            rep.lines.append(f"    {k} = {E.to_text(v)}  (eliminated)")


def _state_from(args, cfg):
    if args.session and Path(args.session).exists():
        try:
            return SessionState.loads(_read(args.session))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad session file {args.session}: {exc}") from None
    if not args.problem:
        raise UsageError("give a problem file or an existing --session")
    problem = _load_problem(args.problem)
    return initial_state(problem, cfg.with_box(problem.box))


def _problem_box(args):
    if args.problem:
        return _load_problem(args.problem).box
    return {}


def cmd_step(args, rep: Report):
    if not args.chart or len(args.chart) != 1:
        raise UsageError("step needs exactly one --chart")
    cfg = _config(args).with_box(_problem_box(args))
    state = _state_from(args, cfg)
    spec = parse_chart(_read(args.chart[0]))
    try:
        new = run_step(state, spec, cfg)
    except StepFailed as exc:
        rep.checks += exc.checks
        rep.add(Check(f"step {exc.step}", False, str(exc)))
        return
    _step_result(rep, new)
    rep.result = {"step": new.reports[-1].to_dict(), "remaining_cosets": len(new.plan)}
    if args.session:
        Path(args.session).write_text(new.dumps() + "\n", encoding="utf-8")


def cmd_chain(args, rep: Report):
    cfg = _config(args).with_box(_problem_box(args))
    state = _state_from(args, cfg)
    specs = [parse_chart(_read(p)) for p in (args.chart or [])]
    try:
        chain = run_chain(state, specs, cfg)
    except StepFailed as exc:
        rep.checks += exc.checks
        rep.add(Check(f"step {exc.step}", False, str(exc)))
        return
    for s in chain.steps[len(chain.steps) - len(specs):]:
        rep.checks += s.checks
    if specs:
        rep.add(Check("residual dimension equals predicted", chain.residual_dimension == chain.predicted,
                      f"{chain.residual_dimension} vs {chain.predicted}"))
        rep.add(Check("consumed generators span a solvable subalgebra", chain.certificate.ok,
                      f"dimension {chain.certificate.span_dim}"))
    rep.result = chain.to_dict()
    rep.lines.append("  final system:")
    rep.lines += ["    " + line for line in chain.state.system.equations_text()]
    for k, v in chain.state.relations.items():
        rep.lines.append(f"    {k} = {E.to_text(v)}  (eliminated)")
    rep.lines += ["    " + q.text() for q in chain.state.quadratures]
    if args.session:
        Path(args.session).write_text(chain.state.dumps() + "\n", encoding="utf-8")


def cmd_verify(args, rep: Report):
    cfg = _config(args)
    run = verify_bundled_example(Path(args.fixture_dir) if args.fixture_dir else None, cfg, args.budget)
    rep.checks += run.checks
    first = run.first_failure()
    rep.result = {"sections": sorted(run.sections), "first_failure": first.name if first else None}


COMMANDS = {"check": cmd_check, "algebra": cmd_algebra, "plan": cmd_plan, "step": cmd_step,
            "chain": cmd_chain, "verify-paper-example": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=8)
    common.add_argument("--rel-tol", type=float, default=1e-9)
    common.add_argument("--abs-tol", type=float, default=1e-12)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--timing", action="store_true", help="include elapsed time in the report")
    common.add_argument("--budget", type=int, default=1000, help="trials for the solvable-subalgebra search")

    p = argparse.ArgumentParser(prog="liereduce", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"liereduce {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check", "algebra", "plan"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("problem")
    for name in ("step", "chain"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("problem", nargs="?")
        s.add_argument("--session")
        s.add_argument("--chart", action="append")
    s = sub.add_parser("verify-paper-example", parents=[common])
    s.add_argument("--fixture-dir")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    rep = Report(args.command, args)
    try:
        COMMANDS[args.command](args, rep)
    except UsageError as exc:
        print(f"liereduce: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"liereduce: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChartError, A.NotSolvableError, A.NotClosedError, A.DependentBasisError,
            E.SamplingExhausted) as exc:
        rep.add(Check(type(exc).__name__, False, str(exc)))
    except Exception:  # noqa: BLE001 - mapped to the internal-error exit code
        traceback.print_exc()
        return EXIT_INTERNAL
    text = rep.render(args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
