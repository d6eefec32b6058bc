"""A non-solvable three-dimensional algebra and a basis exposing a solvable part."""

from liereduce import _linalg as L
from liereduce import algebra as A
from liereduce.golden import SO21, read_fixture
from liereduce.parser import parse_problem

so = parse_problem(read_fixture(SO21))
spec = so.structures[None]
C = A.StructureConstants.from_brackets(spec.basis, spec.brackets)
print("Brackets:", "; ".join(C.text_lines()))
print("Derived dimensions:", A.derived_series(C).dims(), "level:", A.solvability_level(C))
print("Radical dimension:", A.killing_radical(C).dim)

tilted = so.structures["tilted"]
Q = A.matrix_from_combos(so.changes["tilted"], C.labels, tilted.basis)
C3 = A.change_basis(C, L.inverse(Q), tilted.basis)
print("\nIn the new basis:", "; ".join(C3.text_lines()))
sub = A.subalgebra_constants(C3, [A.unit(3, 0), A.unit(3, 1)], ["Y1", "Y2"])
print("span{Y1, Y2}:", "; ".join(sub.text_lines()), "level", A.solvability_level(sub))

found = A.search_max_solvable(C, budget=2000, seed=0)
print(f"\nSeeded search: dimension {found.dim} after {found.trials} trials, basis {found.basis.names(C.labels)}")
