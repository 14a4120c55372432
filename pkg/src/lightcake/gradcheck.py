"""Finite-difference validation of the analytic gradients on tiny random graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregator import AggregationConfig, Aggregator, Variant
from .context import build_context_index
from .dataset import build_dataset
from .model import EmbeddingTables, ModelKind
from .seeding import substream
from .trainer import backward, batch_loss

TOLERANCE = 1e-4
# |a - n| is divided by max(|a|, |n|, floor); the floor keeps entries that are
# zero up to round-off from dominating
DENOM_FLOOR = 1e-6


@dataclass(frozen=True)
class GradcheckResult:
    kind: ModelKind
    num_iterations: int
    seed: int
    max_rel_error: float
    num_parameters: int

    @property
    def passed(self):
        return self.max_rel_error < TOLERANCE


def tiny_graph(seed, num_entities=6, num_relations=3, num_triples=12):
    """Seeded random graph with string symbols (no self loops)."""
    rng = substream(seed, "gradcheck-graph")
    triples = []
    for i in range(num_triples):
        r = i % num_relations
        h, t = rng.choice(num_entities, size=2, replace=False)
        triples.append((f"e{h}", f"r{r}", f"e{t}"))
    return build_dataset(triples)


def relative_error(analytic, numeric, floor=DENOM_FLOOR):
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(loss_fn, tables, step=1e-5):
    """Central differences of ``loss_fn(tables)`` for every table entry."""
    grads = []
    for arr in (tables.entity, tables.relation):
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_fn(tables)
            arr[idx] = orig - step
            down = loss_fn(tables)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return EmbeddingTables(*grads)


def run_gradcheck(kind, num_iterations, seed, dim=6, variant=Variant.BOTH, mask_target_edge=False,
                  l2_coeff=1e-3, step=1e-5, corrupt=False):
    """Compare analytic and central-difference gradients of the full training loss.

    ``corrupt`` perturbs one analytic entry; it exists so callers can confirm
    the check actually fails on a wrong gradient.
    """
    kind = ModelKind.parse(kind)
    ds = tiny_graph(seed)
    ctx = build_context_index(ds)
    rng = substream(seed, "gradcheck-params")
    tables = EmbeddingTables(rng.normal(0.0, 0.5, (ds.num_entities, dim)),
                             rng.normal(0.0, 0.5, (ds.num_relations_augmented, dim)))
    rows = np.arange(len(ds.train))
    if mask_target_edge:
        ctx = ctx.without_sources(rows)
    agg = Aggregator(ctx, kind, AggregationConfig(num_iterations, variant))

    def loss_fn(tb):
        return batch_loss(ds.train[rows], agg.run(tb), ds.num_relations, l2_coeff)[0]

    _, record = batch_loss(ds.train[rows], agg.run(tables), ds.num_relations, l2_coeff)
    analytic = backward(record)
    if corrupt:
        analytic.entity[0, 0] += 0.1 * (abs(analytic.entity[0, 0]) + 1.0)
    numeric = numeric_gradient(loss_fn, tables, step)
    err = max(relative_error(analytic.entity, numeric.entity).max(),
              relative_error(analytic.relation, numeric.relation).max())
    return GradcheckResult(kind, num_iterations, seed, float(err), tables.num_parameters)
