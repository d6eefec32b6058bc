"""Lie point symmetries of ODE systems and order reduction along a solvable coset chain."""

__version__ = "0.1.0"

from .expr import EqualityConfig, equals_probabilistic, simplify, substitute, differentiate
from .parser import parse_expression, parse_problem, parse_chart
from .jet import OdeSystem, VectorField, prolong, commutator, check_symmetry, system_dimension
from .algebra import StructureConstants, structure_constants, derived_series, solvability_level
from .reduce import SessionState, initial_state, run_step, run_chain

__all__ = [
    "EqualityConfig", "equals_probabilistic", "simplify", "substitute", "differentiate",
    "parse_expression", "parse_problem", "parse_chart",
    "OdeSystem", "VectorField", "prolong", "commutator", "check_symmetry", "system_dimension",
    "StructureConstants", "structure_constants", "derived_series", "solvability_level",
    "SessionState", "initial_state", "run_step", "run_chain",
]
