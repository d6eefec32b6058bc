import pytest
from hypothesis import given, settings, strategies as st

from liereduce import expr as E
from liereduce.expr import EqualityConfig
from liereduce.golden import read_fixture
from liereduce.jet import (JetOrderError, OdeSystem, VectorField, check_symmetry, commutator,
                           fields_equal, prolong, system_dimension, total_derivative)
from liereduce.parser import parse_expression as P, parse_problem


@pytest.fixture(scope="module")
def problem():
    return parse_problem(read_fixture("coupled.problem"))


def field(name, xi, **eta):
    return VectorField(name, "t", P(xi), {k: P(v) for k, v in eta.items()})


def test_total_derivative_spec_examples(problem):
    sys = problem.system()
    assert E.is_zero(total_derivative(P("x_1/x"), sys))
    assert total_derivative(P("t"), sys) == E.ONE
    assert total_derivative(P("7"), sys) == E.ZERO
    with pytest.raises(JetOrderError):
        total_derivative(P("x_2"), sys)


def test_prolong_translation_is_trivial():
    Z = VectorField("S", "t", E.ZERO, {"s": E.ONE})
    assert prolong(Z, 4).eta == {"s": E.ONE}


def test_prolong_first_order_of_z3(problem):
    Z3p = prolong(problem.generator("Z3"), 1)
    assert E.equals_probabilistic(Z3p.eta["x_1"], P("x_1*(ln(x) + 1)"))
    assert Z3p.order == 1


def test_prolong_scaling_field():
    Z = VectorField("Y", "s", E.ONE, {"u": P("u"), "w": P("w")})
    Zp = prolong(Z, 1)
    assert Zp.eta == {"u": P("u"), "w": P("w"), "u_1": P("u_1"), "w_1": P("w_1")}


def test_prolong_second_order_matches_chain_rule():
    # time scaling t -> e^a t, x -> x: eta^(k) = -k x_k
    Z = VectorField("D", "t", P("t"), {"x": E.ZERO})
    Zp = prolong(Z, {"x": 3})
    for k in (1, 2, 3):
        assert E.equals_probabilistic(Zp.eta[f"x_{k}"], P(f"-{k}*x_{k}"))


def test_prolong_rejects_prolonged_input():
    Z = prolong(field("V", "1", x="x"), 1)
    with pytest.raises(ValueError):
        prolong(Z, 1)


def test_coupled_brackets(problem):
    Z1, Z2, Z3 = problem.generators
    assert commutator(Z1, Z2).is_zero()
    ok, _ = fields_equal(commutator(Z2, Z3), Z2)
    assert ok
    ok, _ = fields_equal(commutator(Z3, Z1), Z1.scaled_sum([Z1], [-1], "-Z1"))
    assert ok


def test_commutator_mismatched_independent():
    with pytest.raises(ValueError):
        commutator(VectorField("a", "t", E.ONE), VectorField("b", "s", E.ONE))


def test_symmetry_coupled_generators(problem):
    sys = problem.system()
    for Z in problem.generators:
        rep = check_symmetry(Z, sys)
        assert rep.passed, rep.failing()
        assert rep.lam == E.ZERO


def test_symmetry_failure_has_witness():
    sys = OdeSystem("t", ["x"], {"x": 2}, {"x": E.ZERO})
    rep = check_symmetry(field("bad", "0", x="x^2"), sys)
    assert not rep.passed
    var, verdict = rep.failing()[0]
    assert verdict.witness is not None


def test_symmetry_with_nonzero_lambda():
    # dilation in t on x'' = 0
    sys = OdeSystem("t", ["x"], {"x": 2}, {"x": E.ZERO})
    rep = check_symmetry(field("D", "t"), sys)
    assert rep.passed
    assert rep.lam == E.MINUS_ONE


def test_time_translation_on_autonomous_systems():
    sys = OdeSystem("t", ["x", "y"], {"x": 2, "y": 1}, {"x": P("-x + y^2"), "y": P("x_1*y")})
    assert check_symmetry(field("T", "1"), sys).passed


def test_system_dimension(problem):
    assert system_dimension(problem.system()) == 5
    assert system_dimension(OdeSystem("t", ["x"], {"x": 1}, {"x": P("x")})) == 1
    assert system_dimension(OdeSystem("t", ["x", "y"], {"x": 2, "y": 2}, {"x": E.ZERO, "y": E.ZERO})) == 4


# --- property tests on random polynomial-coefficient fields ----------------

monomials = st.tuples(st.integers(-3, 3), st.sampled_from(["1", "t", "x", "y", "x*y", "t*x", "y^2", "x^2"]))
polys = st.lists(monomials, min_size=0, max_size=3).map(
    lambda ms: E.add(*[E.mul(c, P(m)) for c, m in ms]) if ms else E.ZERO)
fields = st.tuples(polys, polys, polys).map(lambda p: VectorField("V", "t", p[0], {"x": p[1], "y": p[2]}))
CFG = EqualityConfig(trials=5)


def _neg(V):
    return V.scaled_sum([V], [-1], "-V")


@settings(max_examples=100, deadline=None, derandomize=True)
@given(fields, fields)
def test_commutator_antisymmetry(V, W):
    ok, bad = fields_equal(commutator(V, W), _neg(commutator(W, V)), CFG)
    assert ok, bad


@settings(max_examples=100, deadline=None, derandomize=True)
@given(fields, fields, fields)
def test_jacobi_identity(U, V, W):
    terms = [commutator(commutator(U, V), W), commutator(commutator(V, W), U),
             commutator(commutator(W, U), V)]
    total = U.scaled_sum(terms, [1, 1, 1], "J")
    assert all(E.is_zero(c, CFG) for c in total.components().values())


@settings(max_examples=100, deadline=None, derandomize=True)
@given(fields, fields, st.integers(1, 2))
def test_prolongation_respects_brackets(V, W, k):
    order = {"x": k, "y": k}
    lhs = prolong(commutator(V, W), order)
    rhs = commutator(prolong(V, order), prolong(W, order))
    ok, bad = fields_equal(lhs, rhs, CFG)
    assert ok, bad
