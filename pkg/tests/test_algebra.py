import itertools
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from liereduce import _linalg as L
from liereduce import algebra as A
from liereduce import expr as E
from liereduce.golden import read_fixture
from liereduce.jet import VectorField
from liereduce.parser import parse_expression as P, parse_problem

F = Fraction


def consts(labels, brackets):
    return A.StructureConstants.from_brackets(labels, brackets)


COUPLED = consts(["Z1", "Z2", "Z3"], {("Z2", "Z3"): {"Z2": 1}, ("Z3", "Z1"): {"Z1": -1}})
SO21C = consts(["X1", "X2", "X3"], {("X1", "X2"): {"X3": -1}, ("X1", "X3"): {"X2": -1},
                                  ("X2", "X3"): {"X1": 1}})
ABELIAN = consts(["a", "b"], {})


def fld(name, xi="0", **eta):
    return VectorField(name, "t", P(xi), {k: P(v) for k, v in eta.items()})


def test_structure_constants_from_fields():
    prob = parse_problem(read_fixture("coupled.problem"))
    C = A.structure_constants(prob.generators)
    assert C == COUPLED
    T = A.structure_constants([fld("X", x="1"), fld("Y", y="1")])
    assert not T.brackets()


def test_structure_constants_sl2_realisation():
    C = A.structure_constants([fld("D", x="x"), fld("K", x="x^2"), fld("T", x="1")])
    assert C.brackets()[("D", "T")] == {"T": -1}  # [x d/dx, d/dx] = -d/dx
    assert C.brackets()[("D", "K")] == {"K": 1}
    assert C.brackets()[("K", "T")] == {"D": -2}
    assert A.verify_algebra_axioms(C).passed


def test_structure_constants_errors():
    with pytest.raises(A.NotClosedError) as info:
        A.structure_constants([fld("T", x="1"), fld("K", x="x^2")])
    assert set(info.value.pair) == {"T", "K"}
    with pytest.raises(A.DependentBasisError):
        A.structure_constants([fld("T", x="1"), fld("T2", x="2")])


def test_axiom_violation_reported():
    C = A.StructureConstants.zeros(["e1", "e2"])
    C.C[0, 0, 1] = F(1)
    C.C[0, 1, 0] = F(1)
    assert (1, 1, 2) in A.verify_algebra_axioms(C).antisymmetry
    assert A.verify_algebra_axioms(COUPLED).passed
    assert A.verify_algebra_axioms(SO21C).passed


def test_derived_series_examples():
    s = A.derived_series(COUPLED)
    assert s.dims() == [3, 2, 0] and s.solvable
    assert L.row_space(s.terms[1].as_lists(), 3) == [[1, 0, 0], [0, 1, 0]]
    assert A.solvability_level(COUPLED) == 2
    assert A.derived_series(ABELIAN).dims() == [2, 0]
    assert A.solvability_level(ABELIAN) == 1
    m = A.derived_series(SO21C)
    assert m.dims() == [3] and m.terminal == "stabilized"
    assert A.solvability_level(SO21C) is None


def test_cosets_and_plan():
    plan = A.reduction_chain(COUPLED, 5)
    assert plan.names() == [["Z1", "Z2"], ["Z3"]]
    assert (plan.r, plan.predicted) == (3, 2)
    assert all(st.abelian_mod_deeper for st in plan.steps)
    assert A.reduction_chain(ABELIAN).names() == [["a", "b"]]
    with pytest.raises(A.NotSolvableError):
        A.reduction_chain(SO21C)


def test_cosets_sizes_for_one_dimensional_derived_algebra():
    # [e1,e2] = e3, e3 central: nilpotent, g(1) = span{e3}
    C = consts(["e1", "e2", "e3"], {("e1", "e2"): {"e3": 1}})
    cs = A.cosets(A.derived_series(C), 3)
    assert [c.dim for c in cs] == [2, 1]


def test_inheritance_examples():
    assert A.check_inheritance(COUPLED, [0, 1], 2)
    assert A.check_inheritance(COUPLED, [0, 1], 0)
    C = consts(["T", "W", "V"], {("T", "W"): {"V": 1}})
    assert not A.check_inheritance(C, [0], 1)
    with pytest.raises(A.NotAbelianError):
        A.check_inheritance(COUPLED, [0, 2], 1)


def test_invariant_subalgebras():
    g1 = A.derived_series(COUPLED).terms[1]
    assert A.check_invariant_subalgebra(COUPLED, g1)
    assert not A.check_invariant_subalgebra(COUPLED, [[0, 0, 1]])
    assert A.check_invariant_subalgebra(COUPLED, L.identity(3))


def test_transitivity_examples():
    prob = parse_problem(read_fixture("coupled.problem"))
    assert A.transitivity_check(prob.generators[:2], ["x", "y"]).transitive
    u = A.transitivity_check([VectorField("U", "s", E.ZERO, {"u": E.ONE}),
                              VectorField("W", "s", E.ZERO, {"w": E.ONE})], ["u", "w"])
    assert u.transitive and u.exact == [True] * 5
    it = parse_problem(read_fixture("intransitive.problem"))
    rep = A.transitivity_check(it.generators, ["t", "s"])
    assert not rep.transitive and set(rep.ranks) == {1}


def test_killing_radical_examples():
    assert A.killing_radical(SO21C).dim == 0
    assert A.killing_radical(COUPLED).dim == 3
    # so(2,1) plus a central element
    C = consts(["X1", "X2", "X3", "c"], {("X1", "X2"): {"X3": -1}, ("X1", "X3"): {"X2": -1},
                                         ("X2", "X3"): {"X1": 1}})
    rad = A.killing_radical(C)
    assert rad.as_lists() == [[0, 0, 0, 1]]


def test_search_max_solvable():
    r = A.search_max_solvable(SO21C, budget=1000, seed=0)
    assert r.dim == 2 and r.level is not None
    assert A.is_closed(SO21C, r.basis.as_lists())
    assert A.search_max_solvable(COUPLED).dim == 3
    ab = A.search_max_solvable(ABELIAN)
    assert ab.dim == 2 and ab.level == 1
    again = A.search_max_solvable(SO21C, budget=1000, seed=0)
    assert again.basis == r.basis


def test_change_basis_to_tilted():
    so = parse_problem(read_fixture("so21.problem"))
    tilted = so.structures["tilted"]
    Q = A.matrix_from_combos(so.changes["tilted"], SO21C.labels, tilted.basis)
    C3 = A.change_basis(SO21C, L.inverse(Q), tilted.basis)
    assert C3 == consts(tilted.basis, tilted.brackets)
    assert A.change_basis(COUPLED, L.identity(3), COUPLED.labels) == COUPLED
    back = A.change_basis(C3, Q, SO21C.labels)
    assert back == SO21C
    with pytest.raises(A.SingularMatrixError):
        A.change_basis(SO21C, [[1, 0, 0], [1, 0, 0], [0, 0, 1]])


def test_solvable_certificate():
    assert A.solvable_span_certificate(COUPLED, [[1, 0, 0], [0, 0, 1]]).ok
    assert not A.solvable_span_certificate(SO21C, L.identity(3)).ok


# --- random solvable algebras: subalgebras of upper-triangular 3x3 matrices --


def _mbracket(a, b):
    n = len(a)
    ab = [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    ba = [[sum(b[i][k] * a[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return [[ab[i][j] - ba[i][j] for j in range(n)] for i in range(n)]


def _flat(m):
    return [F(x) for row in m for x in row]


def _unflat(v, n=3):
    return [list(v[i * n:(i + 1) * n]) for i in range(n)]


def matrix_algebra(gens):
    basis = L.row_space([_flat(g) for g in gens], 9)
    while True:
        new = [_flat(_mbracket(_unflat(a), _unflat(b))) for a, b in itertools.combinations(basis, 2)]
        nxt = L.row_space(basis + new, 9)
        if len(nxt) == len(basis):
            break
        basis = nxt
    r = len(basis)
    labels = [f"e{i + 1}" for i in range(r)]
    C = A.StructureConstants.zeros(labels)
    for a, b in itertools.combinations(range(r), 2):
        coords = L.coordinates(basis, _flat(_mbracket(_unflat(basis[a]), _unflat(basis[b]))))
        for l, c in enumerate(coords):
            C.C[l, a, b] = c
            C.C[l, b, a] = -c
    return C


upper = st.lists(st.integers(-2, 2), min_size=6, max_size=6).map(
    lambda v: [[v[0], v[1], v[2]], [0, v[3], v[4]], [0, 0, v[5]]])


@st.composite
def solvable_algebras(draw):
    gens = draw(st.lists(upper, min_size=2, max_size=3))
    C = matrix_algebra(gens)
    assume(2 <= C.dim <= 5)
    return C


PROPS = settings(max_examples=100, deadline=None, derandomize=True,
                 suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow])


@PROPS
@given(solvable_algebras())
def test_random_algebras_are_valid_and_solvable(C):
    assert A.verify_algebra_axioms(C).passed
    assert A.solvability_level(C) is not None


@PROPS
@given(solvable_algebras())
def test_derived_dimensions_strictly_decrease(C):
    dims = A.derived_series(C).dims()
    assert all(a > b for a, b in zip(dims, dims[1:]))
    assert dims[-1] == 0 or len(dims) == 1 and dims[0] == 0


@PROPS
@given(solvable_algebras())
def test_derived_bracket_containment(C):
    terms = A.derived_series(C).terms + [A.SubalgebraBasis([])]
    for i, j in itertools.permutations(range(len(terms) - 1), 2):
        gi, gj = terms[i].as_lists(), terms[j].as_lists()
        target = terms[max(i, j)]
        for a in gi:
            for b in gj:
                v = C.bracket(a, b)
                assert not any(v) or target.contains(v)
    for k in range(len(terms) - 1):
        assert A.check_invariant_subalgebra(C, terms[k])


@PROPS
@given(solvable_algebras())
def test_cosets_abelian_modulo_deeper_and_partition(C):
    plan = A.reduction_chain(C)
    assert all(s.abelian_mod_deeper for s in plan.steps)
    assert L.rank(plan.adapted_basis) == C.dim


@PROPS
@given(solvable_algebras(), st.lists(st.integers(-2, 2), min_size=25, max_size=25))
def test_change_basis_preserves_level(C, entries):
    r = C.dim
    P = [[F(entries[i * 5 + j]) + (3 if i == j else 0) for j in range(r)] for i in range(r)]
    assume(L.rank(P) == r)
    C2 = A.change_basis(C, P)
    assert A.verify_algebra_axioms(C2).passed
    assert A.solvability_level(C2) == A.solvability_level(C)
    assert A.derived_series(C2).dims() == A.derived_series(C).dims()
