"""Entity and relation context star graphs built from augmented training triples.

Both star graphs are stored as flat, center-sorted arrays (CSR layout) so the
aggregator can work on whole contexts with segment reductions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StarGraph:
    """Leaves of every star, grouped by center.

    For the entity star graph ``first`` holds relations and ``second`` tails;
    for the relation star graph they hold heads and tails. ``source`` is the
    row of ``train_augmented`` each leaf came from.
    """

    center: np.ndarray
    first: np.ndarray
    second: np.ndarray
    source: np.ndarray
    offsets: np.ndarray

    @property
    def num_centers(self):
        return len(self.offsets) - 1

    def __len__(self):
        return len(self.center)

    def sizes(self):
        return np.diff(self.offsets)

    def leaves(self, c):
        lo, hi = self.offsets[c], self.offsets[c + 1]
        return list(zip(self.first[lo:hi].tolist(), self.second[lo:hi].tolist()))

    def without_sources(self, sources):
        """Drop every leaf whose source row is in ``sources``."""
        keep = ~np.isin(self.source, np.asarray(sources))
        return _from_arrays(self.center[keep], self.first[keep], self.second[keep],
                            self.source[keep], self.num_centers)


def _from_arrays(center, first, second, source, num_centers):
    counts = np.bincount(center, minlength=num_centers)
    offsets = np.zeros(num_centers + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    arrays = [np.ascontiguousarray(a, dtype=np.int64) for a in (center, first, second, source)]
    for a in arrays + [offsets]:
        a.setflags(write=False)
    return StarGraph(*arrays, offsets)


def _star(center, first, second, num_centers, cap, rng):
    order = np.argsort(center, kind="stable")
    source = order
    if cap is not None:
        counts = np.bincount(center, minlength=num_centers)
        starts = np.concatenate([[0], np.cumsum(counts)])
        keep = np.ones(len(order), dtype=bool)
        for c in np.flatnonzero(counts > cap):
            lo, hi = starts[c], starts[c + 1]
            chosen = rng.choice(hi - lo, size=cap, replace=False)
            mask = np.zeros(hi - lo, dtype=bool)
            mask[chosen] = True
            keep[lo:hi] = mask
        source = order[keep]
    return _from_arrays(center[source], first[source], second[source], source, num_centers)


@dataclass(frozen=True)
class ContextIndex:
    entity: StarGraph
    relation: StarGraph
    num_relations: int
    cap: int | None = None
    cap_seed: int = 0

    @property
    def num_entities(self):
        return self.entity.num_centers

    def without_sources(self, sources):
        return ContextIndex(self.entity.without_sources(sources),
                            self.relation.without_sources(sources),
                            self.num_relations, self.cap, self.cap_seed)


def build_context_index(dataset, cap=None, cap_seed=0):
    """Materialize both star graphs from ``dataset.train_augmented``.

    With ``cap`` set, contexts longer than ``cap`` are down-sampled without
    replacement; the kept leaves stay in their original order.
    """
    if cap is not None and cap < 1:
        raise ValueError(f"context cap must be a positive integer, got {cap}")
    aug = np.asarray(dataset.train_augmented)
    if len(aug) == 0:
        raise ValueError("cannot build contexts from an empty training split")
    h, r, t = aug[:, 0], aug[:, 1], aug[:, 2]
    rng = np.random.default_rng(cap_seed)
    ent = _star(h, r, t, dataset.num_entities, cap, rng)
    rel = _star(r, h, t, dataset.num_relations_augmented, cap, rng)
    return ContextIndex(ent, rel, dataset.num_relations, cap, cap_seed)


def context_of_entity(index, h):
    """``(relation, tail)`` leaves of entity ``h``."""
    if not 0 <= h < index.entity.num_centers:
        raise IndexError(f"entity id {h} out of range [0, {index.entity.num_centers})")
    return index.entity.leaves(h)


def context_of_relation(index, r):
    """``(head, tail)`` leaves of relation ``r`` (inverses included)."""
    if not 0 <= r < index.relation.num_centers:
        raise IndexError(f"relation id {r} out of range [0, {index.relation.num_centers})")
    return index.relation.leaves(r)
