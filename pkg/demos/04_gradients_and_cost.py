"""
Gradient check and cost accounting
==================================

The backward pass through the attention softmaxes is written by hand, so it
is checked against central finite differences on tiny random graphs.
Aggregation adds no parameters: the count depends on the vocabulary sizes and
the dimension, and the number of steps only changes the work per forward pass.
"""

from lightcake import ModelKind, Variant
from lightcake.cli import efficiency_report
from lightcake.gradcheck import run_gradcheck
from lightcake.synthetic import typed_graph

for kind in ModelKind:
    for L in range(4):
        res = run_gradcheck(kind, L, seed=1)
        print(f"{kind.label:<9} L={L}  max relative error {res.max_rel_error:.2e}  "
              f"{'ok' if res.passed else 'FAILED'}")

# A deliberately broken backward pass is caught.
print("corrupted:", run_gradcheck(ModelKind.DISTMULT, 2, seed=1, corrupt=True).passed)

ds, _ = typed_graph(num_entities=500, num_types=5, num_relations=8, num_triples=4000, seed=0)
print(f"\n|E|={ds.num_entities}  |R|={ds.num_relations}")
print("dim  L  variant  parameters  context entries per forward pass")
for dim in (32, 64):
    for L in (0, 2, 4):
        for variant in (Variant.BOTH, Variant.ENTITY_ONLY):
            rep = efficiency_report(ds, ModelKind.DISTMULT, dim, L, variant)
            print(f"{dim:<4} {L}  {variant.label:<7}  {rep.trainable_parameter_count:>10}  {rep.aggregation_work:>8}")
