"""A small two-level chain on the free particle: translation, then scaling.

The algebra {X = d/dx, D = x d/dx} has [X, D] = X, so X is consumed
first and D survives to the second step.
"""

from liereduce.expr import to_text
from liereduce.parser import parse_chart, parse_problem
from liereduce.reduce import initial_state, run_chain

problem = parse_problem("""
independent t
dependent x order 2
equation x'' = 0
generator X = d/dx
generator D = x*d/dx
""")

shift = parse_chart("""
chart shift {
  s = t
  u = x
  inverse { t = s; x = u }
  rectify { X = u }
  reduce { tau = s; p = u' }
}
""")

scale = parse_chart("""
chart scale {
  sigma = tau
  h = ln(p)
  inverse { tau = sigma; p = exp(h) }
  rectify { D = h }
  reduce { k = sigma; v = h' }
}
""")

chain = run_chain(initial_state(problem), [shift, scale])
for rep in chain.steps:
    print(f"step {rep.index} ({rep.chart}) consumed {rep.coset}:")
    for line in rep.system_after.equations_text():
        print("  ", line)
    for v, rel in rep.relations.items():
        print(f"   {v} = {to_text(rel)}  (algebraic, eliminated)")
    for name, V in rep.reduced_fields.items():
        print(f"   reduced {name}: {V.text()}")
print("quadratures:", "; ".join(q.text() for q in chain.state.quadratures))
print("residual dimension", chain.residual_dimension, "predicted", chain.predicted)
