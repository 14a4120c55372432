"""Relation-prediction training with exact gradients through the aggregation.

The loss is the mean negative log-likelihood of the true relation under a
softmax over the original relations, plus an L2 penalty on the base tables.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .aggregator import AggregationConfig, Aggregator, Variant
from .context import build_context_index
from .evaluator import candidate_scores, evaluate, query_chunks
from .model import EmbeddingTables, ModelKind, candidate_scores_backward, init_embeddings
from .seeding import derive_seed, substream


@dataclass(frozen=True)
class TrainConfig:
    model: ModelKind = ModelKind.DISTMULT
    learning_rate: float = 5e-3
    l2_coeff: float = 1e-7
    batch_size: int = 512
    dim: int = 256
    num_iterations: int = 4
    max_epochs: int = 20
    patience: int = 3
    seed: int = 0
    variant: Variant = Variant.BOTH
    mask_target_edge: bool = False
    context_cap: int | None = None
    cap_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind.parse(self.model))
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        errors = self.validate()
        if errors:
            raise ValueError("invalid training config: " + "; ".join(errors))

    def validate(self):
        errors = []
        if self.learning_rate <= 0:
            errors.append("learning_rate must be > 0")
        if self.l2_coeff < 0:
            errors.append("l2_coeff must be >= 0")
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if self.dim < 1:
            errors.append("dim must be >= 1")
        if self.num_iterations < 0:
            errors.append("num_iterations must be >= 0")
        if self.max_epochs < 0:
            errors.append("max_epochs must be >= 0")
        if self.patience < 1:
            errors.append("patience must be >= 1")
        if self.context_cap is not None and self.context_cap < 1:
            errors.append("context_cap must be >= 1")
        return errors

    @property
    def aggregation(self):
        return AggregationConfig(self.num_iterations, self.variant)

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _log_softmax(scores):
    peak = scores.max(axis=-1, keepdims=True)
    shifted = scores - peak
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def relation_logprobs(h, t, final_tables, kind, num_relations):
    """``log p(r | h, t)`` for every original relation ``r``."""
    E = final_tables.entity
    s = candidate_scores(ModelKind.parse(kind), E[[h]], E[[t]], final_tables.relation[:num_relations])
    return _log_softmax(s)[0]


@dataclass
class BatchRecord:
    triples: np.ndarray
    state: object
    probs: np.ndarray
    num_relations: int
    l2_coeff: float


def batch_loss(batch, state, num_relations, l2_coeff=0.0):
    """Mean NLL of ``batch`` under the final layer of ``state`` plus the L2 penalty."""
    batch = np.asarray(batch)
    if len(batch) == 0:
        raise ValueError("empty batch")
    E, R = state.final.entity, state.final.relation[:num_relations]
    h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
    probs = np.empty((len(batch), num_relations))
    nll = 0.0
    for sl in query_chunks(len(batch), num_relations, E.shape[1]):
        logp = _log_softmax(candidate_scores(state.kind, E[h[sl]], E[t[sl]], R))
        nll -= np.sum(logp[np.arange(len(logp)), r[sl]])
        probs[sl] = np.exp(logp)
    loss = nll / len(batch)
    if l2_coeff:
        base = state.base
        loss += l2_coeff * (np.sum(base.entity ** 2) + np.sum(base.relation ** 2))
    return float(loss), BatchRecord(batch, state, probs, num_relations, l2_coeff)


def backward(record):
    """Gradient of the batch loss w.r.t. the base (layer-0) tables."""
    state = record.state
    E, R_all = state.final.entity, state.final.relation
    R = R_all[:record.num_relations]
    b = len(record.triples)
    h, r, t = record.triples[:, 0], record.triples[:, 1], record.triples[:, 2]
    g_scores = record.probs.copy()
    g_scores[np.arange(b), r] -= 1.0
    g_scores /= b
    gE = np.zeros_like(E)
    gR = np.zeros_like(R_all)
    for sl in query_chunks(b, record.num_relations, E.shape[1]):
        gh, gt, gr = candidate_scores_backward(state.kind, E[h[sl]], E[t[sl]], R, g_scores[sl])
        np.add.at(gE, h[sl], gh)
        np.add.at(gE, t[sl], gt)
        gR[:record.num_relations] += gr
    grads = state.backward(EmbeddingTables(gE, gR))
    if record.l2_coeff:
        base = state.base
        grads = EmbeddingTables(grads.entity + 2.0 * record.l2_coeff * base.entity,
                                grads.relation + 2.0 * record.l2_coeff * base.relation)
    return grads


@dataclass
class AdamState:
    entity_m: np.ndarray
    entity_v: np.ndarray
    relation_m: np.ndarray
    relation_v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, tables, **kw):
        return cls(np.zeros_like(tables.entity), np.zeros_like(tables.entity),
                   np.zeros_like(tables.relation), np.zeros_like(tables.relation), **kw)


def adam_update(tables, grads, state, lr):
    """One bias-corrected Adam step, applied to ``tables`` in place."""
    if (grads.entity.shape != tables.entity.shape or grads.relation.shape != tables.relation.shape
            or state.entity_m.shape != tables.entity.shape
            or state.relation_m.shape != tables.relation.shape):
        raise ValueError("shape mismatch between parameters, gradients and optimizer state")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in ((tables.entity, grads.entity, state.entity_m, state.entity_v),
                       (tables.relation, grads.relation, state.relation_m, state.relation_v)):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return tables, state


def train_step(tables, batch_rows, dataset, context, aggregator, config, opt):
    """Forward, backward and Adam update on the training rows ``batch_rows``."""
    if config.mask_target_edge:
        aggregator = Aggregator(context.without_sources(batch_rows), config.model, config.aggregation)
    state = aggregator.run(tables)
    loss, record = batch_loss(dataset.train[batch_rows], state, dataset.num_relations, config.l2_coeff)
    adam_update(tables, backward(record), opt, config.learning_rate)
    return loss


def final_tables(tables, context, config):
    return Aggregator(context, config.model, config.aggregation).run(tables).final


def fit(dataset, config, context=None, tables=None, on_epoch=None, on_improve=None):
    """Train until valid MRR stalls for ``patience`` epochs or ``max_epochs`` is hit.

    Returns the tables from the best-validation epoch and one log record per
    epoch. ``on_improve(epoch, tables)`` fires whenever validation MRR improves.
    """
    if len(dataset.valid) == 0:
        raise ValueError("early stopping needs a non-empty valid split")
    if context is None:
        context = build_context_index(dataset, config.context_cap, config.cap_seed)
    if tables is None:
        tables = init_embeddings(dataset.num_entities, dataset.num_relations_augmented,
                                 config.dim, derive_seed(config.seed, "init"))
    best = tables.copy()
    log = []
    if config.max_epochs == 0:
        return best, log

    opt = AdamState.zeros_like(tables)
    shuffle = substream(config.seed, "shuffle")
    aggregator = Aggregator(context, config.model, config.aggregation)
    best_mrr, stale = -np.inf, 0
    n = len(dataset.train)
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = shuffle.permutation(n)
        losses = []
        for lo in range(0, n, config.batch_size):
            rows = order[lo:lo + config.batch_size]
            losses.append(train_step(tables, rows, dataset, context, aggregator, config, opt))
        report = evaluate(dataset.valid, aggregator.run(tables).final, config.model,
                          dataset.num_relations)
        improved = report.mrr > best_mrr
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "valid_mrr": report.mrr,
            "valid_mr": report.mr,
            "valid_hit3": report.hit3,
            "improved": bool(improved),
            "wall_time": time.perf_counter() - started,
        }
        log.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if improved:
            best_mrr, stale = report.mrr, 0
            best = tables.copy()
            if on_improve is not None:
                on_improve(epoch, best)
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, log
