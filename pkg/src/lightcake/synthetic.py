"""Seeded synthetic knowledge graphs for demos and tests.

Entities carry a hidden type; the relation of an edge is a fixed, symmetric
function of the {head type, tail type} pair, with a little label noise. Predicting the
relation from an entity pair therefore comes down to inferring both types,
which the neighbourhood of each entity reveals.
"""

from __future__ import annotations

import os

import numpy as np

from .dataset import build_dataset


def typed_graph_triples(num_entities=300, num_types=6, num_relations=8, num_triples=2400,
                        noise=0.05, seed=0):
    """Raw ``(head, relation, tail)`` string triples, shuffled."""
    rng = np.random.default_rng(seed)
    types = rng.integers(num_types, size=num_entities)
    iu = np.triu_indices(num_types)
    labels = rng.integers(num_relations, size=len(iu[0]))
    # every relation label is used by some type pair
    labels[rng.permutation(len(labels))[:num_relations]] = np.arange(min(num_relations, len(labels)))
    rel_of_pair = np.zeros((num_types, num_types), dtype=np.int64)
    rel_of_pair[iu] = labels
    rel_of_pair.T[iu] = labels
    seen = set()
    triples = []
    while len(triples) < num_triples:
        h, t = rng.integers(num_entities, size=2)
        if h == t:
            continue
        r = rel_of_pair[types[h], types[t]]
        if rng.random() < noise:
            r = rng.integers(num_relations)
        key = (h, r, t)
        if key in seen:
            continue
        seen.add(key)
        triples.append((f"ent{h}", f"rel{r}", f"ent{t}"))
    return triples


def typed_graph(num_entities=300, num_types=6, num_relations=8, num_triples=2400, noise=0.05,
                valid_fraction=0.1, test_fraction=0.1, seed=0):
    """Split a synthetic graph into train/valid/test and build a ``Dataset``."""
    raw = typed_graph_triples(num_entities, num_types, num_relations, num_triples, noise, seed)
    n_valid = int(round(valid_fraction * len(raw)))
    n_test = int(round(test_fraction * len(raw)))
    test, valid, train = raw[:n_test], raw[n_test:n_test + n_valid], raw[n_test + n_valid:]
    return build_dataset(train, valid, test), (train, valid, test)


def write_splits(directory, splits):
    """Write ``(train, valid, test)`` raw triples as TAB-separated files."""
    os.makedirs(directory, exist_ok=True)
    for name, triples in zip(("train", "valid", "test"), splits):
        with open(os.path.join(directory, f"{name}.txt"), "w", encoding="utf-8") as fh:
            for h, r, t in triples:
                fh.write(f"{h}\t{r}\t{t}\n")
