"""
Entity and relation contexts on a toy graph
===========================================

Every training triple is stored twice, once as written and once with the
inverse relation, and the context of a node is read off that doubled list.
"""

from lightcake import build_context_index, build_dataset, compute_stats, context_of_entity, context_of_relation

triples = [
    ("alice", "likes", "bob"),
    ("bob", "likes", "carol"),
    ("alice", "knows", "carol"),
    ("carol", "knows", "dave"),
]
ds = build_dataset(triples, valid=[("bob", "knows", "dave")], test=[("alice", "likes", "dave")])

# The augmented training list. Inverses get ids shifted by the number of relations.
for row in ds.train_augmented:
    print(row, ds.decode(row))


def rel_name(r):
    return ds.decode((0, r, 0))[1]


# Entity context: the (relation, tail) pairs hanging off each head.
ctx = build_context_index(ds)
for name in ds.entity_vocab.symbols:
    leaves = [(rel_name(r), ds.entity_vocab.symbol(t)) for r, t in context_of_entity(ctx, ds.entity_vocab[name])]
    print(f"{name:>6}: {leaves}")

# Relation context: the (head, tail) pairs each relation connects.
for r in range(ds.num_relations_augmented):
    pairs = [(ds.entity_vocab.symbol(h), ds.entity_vocab.symbol(t)) for h, t in context_of_relation(ctx, r)]
    print(f"{rel_name(r):>9}: {pairs}")

# dave is never a head in the raw data, yet his context is not empty:
# the inverse of (carol, knows, dave) gives him the leaf (knows^-1, carol).
# Valid and test triples never enter any context.
print()
print(compute_stats(ds).format())

# A cap keeps at most k leaves per node, sampled once with a fixed seed.
capped = build_context_index(ds, cap=1, cap_seed=0)
print("\ncontext sizes, full  :", ctx.entity.sizes().tolist())
print("context sizes, cap=1 :", capped.entity.sizes().tolist())
