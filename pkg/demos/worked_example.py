"""Walk through the bundled coupled system: symmetries, algebra, both reductions.

Run with ``python demos/worked_example.py``.
"""

from liereduce import algebra as A
from liereduce import expr as E
from liereduce.expr import EqualityConfig
from liereduce.golden import BRANCHES, PROBLEM, STEP1, read_fixture
from liereduce.jet import check_symmetry, system_dimension
from liereduce.parser import parse_chart, parse_problem
from liereduce.reduce import initial_state, run_chain, run_step

problem = parse_problem(read_fixture(PROBLEM))
cfg = EqualityConfig().with_box(problem.box)
sys_ = problem.system()

print("System:")
for line in sys_.equations_text():
    print("  ", line)

# Each generator must satisfy [Z^(n-1), A] = lambda A.
for Z in problem.generators:
    rep = check_symmetry(Z, sys_, cfg)
    print(f"{Z.name} = {Z.text():32s} symmetry: {rep.passed}  lambda = {E.to_text(rep.lam)}")

C = A.structure_constants(problem.generators, cfg)
print("\nBrackets:", "; ".join(C.text_lines()))
plan = A.reduction_chain(C, system_dimension(sys_))
print("Derived series dimensions:", A.derived_series(C).dims())
print("Coset chain:", plan.names(), f"N = {plan.dimension}, r = {plan.r}, predicted {plan.predicted}")

# First step consumes the Abelian coset {Z1, Z2}.
state = run_step(initial_state(problem, cfg, C), parse_chart(read_fixture(STEP1)), cfg)
step = state.reports[-1]
print("\nAfter step 1 (dimension", system_dimension(state.system), ")")
for line in state.system.equations_text():
    print("  ", line)
for q in state.quadratures:
    print("  ", q.text())
print("   reduced Z3:", step.reduced_fields["Z3"].text())

# Two charts rectify the reduced Z3 differently and give different final forms.
for name in BRANCHES:
    chain = run_chain(state, [parse_chart(read_fixture(name))], cfg)
    print(f"\n{name}: residual dimension {chain.residual_dimension}, predicted {chain.predicted}")
    for line in chain.state.system.equations_text():
        print("  ", line)
    for v, rel in chain.state.relations.items():
        print(f"   {v} = {E.to_text(rel)}   (eliminated)")
    print("   third quadrature:", chain.state.quadratures[-1].text())
    print("   consumed generators span a solvable subalgebra:", chain.certificate.ok)
