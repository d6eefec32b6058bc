import json

import pytest

from liereduce import algebra as A
from liereduce import expr as E
from liereduce.expr import EqualityConfig
from liereduce.golden import BRANCHES, STEP1, read_fixture
from liereduce.jet import OdeSystem, VectorField, check_symmetry, fields_equal, system_dimension
from liereduce.parser import parse_chart, parse_expression as P, parse_problem
from liereduce.reduce import (ChartError, CyclicityError, SessionState, check_cyclic,
                              compare_with_residuals, initial_state, make_chart, restrict,
                              run_chain, run_step, transform_field, transform_system, verify_chart)
from liereduce.report import StepFailed

CFG = EqualityConfig()

LINE = """
independent t
dependent x order 2
equation x'' = 0
generator X = d/dx
generator D = x*d/dx
"""

LINE_STEP1 = """
chart shift {
  s = t
  u = x
  inverse { t = s; x = u }
  rectify { X = u }
  reduce { tau = s; p = u' }
}
"""

LINE_STEP2 = """
chart scale {
  sigma = tau
  h = ln(p)
  inverse { tau = sigma; p = exp(h) }
  rectify { D = h }
  reduce { k = sigma; v = h' }
}
"""

FREE = """
chart ident {
  s = t
  X = x
  Y = y
  inverse { t = s; x = X; y = Y }
  rectify { T1 = X; T2 = Y }
  reduce { tau = s; p = X'; q = Y' }
}
"""


@pytest.fixture(scope="module")
def coupled():
    prob = parse_problem(read_fixture("coupled.problem"))
    cfg = CFG.with_box(prob.box)
    return prob, cfg, initial_state(prob, cfg)


@pytest.fixture(scope="module")
def step1(coupled):
    prob, cfg, s0 = coupled
    return run_step(s0, parse_chart(read_fixture(STEP1)), cfg)


def _chart(coupled, name=STEP1):
    prob, _, _ = coupled
    sys = prob.system()
    return make_chart(parse_chart(read_fixture(name)), sys.independent, sys.dependents)


def test_verify_chart_rectifies_first_coset(coupled):
    prob, cfg, _ = coupled
    Z1, Z2, Z3 = prob.generators
    checks = verify_chart(_chart(coupled), [(Z1, "u"), (Z2, "w")], cfg)
    assert all(c.passed for c in checks)
    bad = verify_chart(_chart(coupled), [(Z3, "u")], cfg)
    assert not all(c.passed for c in bad)


def test_identity_chart_rectifies_translation():
    spec = parse_chart("chart id {\n s = t\n y = x\n inverse { t = s; x = y }\n rectify { X = y }\n}\n")
    chart = make_chart(spec, "t", ["x"])
    X = VectorField("X", "t", E.ZERO, {"x": E.ONE})
    assert all(c.passed for c in verify_chart(chart, [(X, "y")]))
    assert transform_field(X, chart).eta == {"y": E.ONE}


def test_transform_fields(coupled):
    prob, cfg, _ = coupled
    chart = _chart(coupled)
    Z1, Z2, Z3 = [transform_field(Z, chart) for Z in prob.generators]
    assert Z1.eta == {"u": E.ONE} and Z1.xi == E.ZERO
    assert Z2.eta == {"w": E.ONE}
    want = VectorField("Z3", "s", E.ONE, {"u": P("u"), "w": P("w")})
    assert fields_equal(Z3, want, cfg)[0]


def test_transform_system_matches_expected(coupled):
    prob, cfg, _ = coupled
    res = transform_system(prob.system(), _chart(coupled), cfg)
    want = [P("w_3 - u_1 + 2*w_1 - 3*w_2"), P("u_2 + w_2")]
    assert all(c.passed for c in compare_with_residuals(res.system, want, cfg))


def test_identity_chart_leaves_system_unchanged():
    sys = OdeSystem("t", ["x"], {"x": 2}, {"x": P("-x + t*x_1^2")})
    spec = parse_chart("chart id {\n s = t\n y = x\n inverse { t = s; x = y }\n}\n")
    res = transform_system(sys, make_chart(spec, "t", ["x"]))
    assert E.equals_probabilistic(res.system.rhs["y"], P("-y + s*y_1^2"))


def test_make_chart_rejects_bad_universe(coupled):
    prob, _, _ = coupled
    spec = parse_chart("chart c {\n s = t\n u = z\n w = y\n inverse { t = s; x = u; y = w }\n}\n")
    with pytest.raises(ChartError):
        make_chart(spec, "t", ["x", "y"])


def test_check_cyclic_examples(coupled):
    prob, cfg, _ = coupled
    transformed = transform_system(prob.system(), _chart(coupled), cfg).system
    assert check_cyclic(transformed, ["u", "w"], cfg).passed
    sys = OdeSystem("t", ["x"], {"x": 2}, {"x": P("x")})
    assert not check_cyclic(sys, ["x"]).passed
    assert check_cyclic(sys, []).passed
    with pytest.raises(CyclicityError):
        restrict(sys, ["x"])


def test_restrict_first_order_to_zero_dimension():
    sys = OdeSystem("t", ["x"], {"x": 1}, {"x": P("t^2")})
    res = restrict(sys, ["x"], {"x_1": "p"})
    assert system_dimension(res.system) == 0
    assert res.system.rhs["p"] == P("t^2")
    assert [q.target for q in res.quadratures] == ["x"]


def test_step1(step1):
    rep = step1.reports[-1]
    assert rep.passed
    assert system_dimension(step1.system) == 3
    assert [q.target for q in step1.quadratures] == ["u", "w"]
    assert rep.survivors == ["Z3"]
    Y3 = rep.reduced_fields["Z3"]
    want = VectorField("Y3", "tau", E.ONE, {"p": P("p"), "q": P("q")})
    assert fields_equal(Y3, want)[0]
    assert check_symmetry(Y3, step1.system).passed


def test_session_round_trip(step1, coupled):
    _, cfg, _ = coupled
    text = step1.dumps()
    again = SessionState.loads(text)
    assert again.dumps() == text
    a = run_step(step1, parse_chart(read_fixture(BRANCHES[1])), cfg)
    b = run_step(again, parse_chart(read_fixture(BRANCHES[1])), cfg)
    assert a.system.equations_text() == b.system.equations_text()


def test_session_version_checked(step1):
    d = json.loads(step1.dumps())
    d["version"] = "other/9"
    with pytest.raises(ValueError):
        SessionState.from_dict(d)


def test_chart_order_swapped_aborts(coupled):
    _, cfg, s0 = coupled
    with pytest.raises(StepFailed) as info:
        run_step(s0, parse_chart(read_fixture(BRANCHES[0])), cfg)
    assert info.value.step == 1
    assert not info.value.checks[-1].passed


def test_non_abelian_coset_aborts(coupled):
    _, cfg, s0 = coupled
    bad = SessionState(s0.step, s0.system, s0.generators, s0.constants,
                       [[[1, 0, 0], [0, 0, 1]]], s0.original, s0.dimension)
    text = read_fixture(STEP1).replace("Z2 = w", "Z3 = w")
    with pytest.raises(StepFailed, match="not Abelian"):
        run_step(bad, parse_chart(text), cfg)


def test_failed_step_leaves_state_alone(step1, coupled):
    _, cfg, _ = coupled
    before = step1.dumps()
    with pytest.raises(StepFailed):
        run_step(step1, parse_chart(read_fixture(STEP1)), cfg)
    assert step1.dumps() == before


def test_empty_chain_on_empty_plan():
    prob = parse_problem(read_fixture("abelian.problem"))
    s0 = initial_state(prob)
    done = run_chain(s0, [parse_chart(FREE)])
    assert done.passed
    again = run_chain(done.state, [])
    assert again.state.dumps() == done.state.dumps()


def test_branch_a_final_equation(step1, coupled):
    _, cfg, _ = coupled
    chain = run_chain(step1, [parse_chart(read_fixture(BRANCHES[0]))], cfg)
    want = [P("m_2 + (1 + m_1)^2*(2*m*m_1 + (-1 + m_1)*k)/(m + k)^2")]
    assert all(c.passed for c in compare_with_residuals(chain.state.system, want, cfg))
    assert chain.residual_dimension == chain.predicted == 2
    assert len(chain.state.quadratures) == 3


def test_branch_b_final_pair(step1, coupled):
    _, cfg, _ = coupled
    chain = run_chain(step1, [parse_chart(read_fixture(BRANCHES[1]))], cfg)
    want = [P("m_1 + v*(m + k) + 1"), P("v_1 + v^2*(1 + v*m)")]
    assert all(c.passed for c in compare_with_residuals(chain.state.system, want, cfg))


def test_two_level_line_chain():
    prob = parse_problem(LINE)
    s0 = initial_state(prob)
    assert [[A.vector_text(r, s0.labels) for r in c] for c in s0.plan] == [["X"], ["D"]]
    chain = run_chain(s0, [parse_chart(LINE_STEP1), parse_chart(LINE_STEP2)])
    assert chain.passed
    assert chain.residual_dimension == 0
    s1 = chain.steps[0]
    assert fields_equal(s1.reduced_fields["D"], VectorField("D", "tau", E.ZERO, {"p": P("p")}))[0]


def test_free_particle_single_step():
    prob = parse_problem(read_fixture("abelian.problem"))
    chain = run_chain(initial_state(prob), [parse_chart(FREE)])
    assert chain.passed
    assert chain.state.system.rhs == {"p": E.ZERO, "q": E.ZERO}
    assert [q.constant for q in chain.state.quadratures] == ["c1", "c2"]


def _successful_chains():
    prob = parse_problem(read_fixture("coupled.problem"))
    cfg = CFG.with_box(prob.box)
    s1 = run_step(initial_state(prob, cfg), parse_chart(read_fixture(STEP1)), cfg)
    out = [run_chain(s1, [parse_chart(read_fixture(b))], cfg) for b in BRANCHES]
    out.append(run_chain(initial_state(parse_problem(LINE)), [parse_chart(LINE_STEP1), parse_chart(LINE_STEP2)]))
    out.append(run_chain(initial_state(parse_problem(read_fixture("abelian.problem"))), [parse_chart(FREE)]))
    return out


@pytest.mark.parametrize("idx", range(4))
def test_consumed_generators_span_solvable_subalgebra(idx):
    chain = _successful_chains()[idx]
    cert = chain.certificate
    assert cert.ok
    assert cert.span_dim == len(chain.state.consumed)
    assert chain.residual_dimension == chain.state.dimension - cert.span_dim + chain.state.autonomy


@pytest.mark.parametrize("idx", range(4))
def test_every_step_checks_survivor_symmetry_and_brackets(idx):
    chain = _successful_chains()[idx]
    for rep in chain.steps:
        names = [c.name for c in rep.checks]
        for s in rep.survivors:
            assert any(s in n and "symmetry" in n for n in names), names
        assert all(c.passed for c in rep.checks)
        for q in rep.quadratures:
            assert q.integrand.free_vars <= set(rep.system_after.coordinates()) | {
                f"{d}_{rep.system_after.orders[d]}" for d in rep.system_after.dependents} | set(rep.relations)
