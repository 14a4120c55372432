"""Iterative attention-weighted aggregation over the context star graphs.

One step updates every entity and relation synchronously from the layer-``l``
tables::

    e_h <- e_h + sum_{(r', t') in C_ent(h)} alpha * phi_ent(e_r', e_t')
    e_r <- e_r + sum_{(h', t') in C_rel(r)} beta  * phi_rel(e_h', e_t')

where ``alpha`` / ``beta`` are softmaxes of the model score over each context.
Rows with an empty context copy through. The backward pass differentiates the
whole stack, attention softmaxes included, back to the base tables.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .model import (EmbeddingTables, ModelKind, phi_rows, phi_rows_backward, score_rows,
                    score_rows_backward)


class Variant(enum.IntEnum):
    BOTH = 0
    ENTITY_ONLY = 1
    RELATION_ONLY = 2
    NONE = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return cls(int(value))
        key = str(value).strip().lower()
        aliases = {"both": cls.BOTH, "ent": cls.ENTITY_ONLY, "entity_only": cls.ENTITY_ONLY,
                   "rel": cls.RELATION_ONLY, "relation_only": cls.RELATION_ONLY, "none": cls.NONE}
        if key not in aliases:
            raise ValueError(f"unknown aggregation variant {value!r}; expected both, ent, rel or none")
        return aliases[key]

    @property
    def label(self):
        return ("both", "ent", "rel", "none")[self]

    @property
    def uses_entity_context(self):
        return self in (Variant.BOTH, Variant.ENTITY_ONLY)

    @property
    def uses_relation_context(self):
        return self in (Variant.BOTH, Variant.RELATION_ONLY)


@dataclass(frozen=True)
class AggregationConfig:
    num_iterations: int = 4
    variant: Variant = Variant.BOTH

    def __post_init__(self):
        if self.num_iterations < 0:
            raise ValueError("num_iterations must be >= 0")
        object.__setattr__(self, "variant", Variant.parse(self.variant))

    @property
    def effective_iterations(self):
        return 0 if self.variant == Variant.NONE else self.num_iterations


class _Segments:
    """Contiguous groups of a center-sorted star graph, skipping empty centers."""

    def __init__(self, star):
        sizes = star.sizes()
        nonempty = sizes > 0
        self.centers = np.flatnonzero(nonempty)
        self.starts = star.offsets[:-1][nonempty]
        self.ids = np.repeat(np.arange(len(self.centers)), sizes[nonempty])

    def __len__(self):
        return len(self.centers)

    def softmax(self, s):
        peak = np.maximum.reduceat(s, self.starts)
        ex = np.exp(s - peak[self.ids])
        return ex / np.add.reduceat(ex, self.starts)[self.ids]

    def softmax_backward(self, w, gw):
        wg = w * gw
        return wg - w * np.add.reduceat(wg, self.starts)[self.ids]

    def weighted_sum(self, w, msg):
        return np.add.reduceat(w[:, None] * msg, self.starts, axis=0)


def _segment_softmax(scores):
    """Reference stable softmax of a single context (used for single-row queries)."""
    s = np.asarray(scores, dtype=np.float64)
    ex = np.exp(s - s.max())
    return ex / ex.sum()


def _incidence(index, n_rows):
    """Sparse ``n_rows x len(index)`` 0/1 matrix; ``M @ X`` adds row ``i`` of X into row ``index[i]``."""
    cols = np.arange(len(index))
    return sp.csr_matrix((np.ones(len(index)), (index, cols)), shape=(n_rows, len(index)))


BACKENDS = ("numba", "numpy")


class Aggregator:
    """Aggregation over a fixed context index.

    ``backend="numba"`` runs fused sequential kernels; ``backend="numpy"`` is
    the vectorized formulation (segment reductions plus a sparse scatter for
    the backward pass). Both compute the same function.
    """

    def __init__(self, context, kind, config=None, backend="numba"):
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
        self.context = context
        self.kind = ModelKind.parse(kind)
        self.config = config or AggregationConfig()
        self.backend = backend
        self._ent_seg = _Segments(context.entity)
        self._rel_seg = _Segments(context.relation)
        self._scatter = None

    @property
    def _use_ent(self):
        return self.config.variant.uses_entity_context and len(self._ent_seg) > 0

    @property
    def _use_rel(self):
        return self.config.variant.uses_relation_context and len(self._rel_seg) > 0

    def step(self, tables):
        """One synchronous aggregation step: returns (new tables, alpha, beta)."""
        if self.backend == "numba":
            return self._step_fused(tables)
        E, R = tables.entity, tables.relation
        E2, R2 = E, R
        alpha = beta = None
        kind = self.kind
        if self._use_ent:
            star, seg = self.context.entity, self._ent_seg
            H, A, B = E[star.center], R[star.first], E[star.second]
            alpha = seg.softmax(score_rows(kind, H, A, B))
            E2 = E.copy()
            E2[seg.centers] += seg.weighted_sum(alpha, phi_rows(kind, A, B))
        if self._use_rel:
            star, seg = self.context.relation, self._rel_seg
            H, C, T = E[star.first], R[star.center], E[star.second]
            beta = seg.softmax(score_rows(kind, H, C, T))
            R2 = R.copy()
            R2[seg.centers] += seg.weighted_sum(beta, phi_rows(kind, H, T))
        return EmbeddingTables(E2, R2), alpha, beta

    def run(self, base):
        layers, alphas, betas = [base], [], []
        for _ in range(self.config.effective_iterations):
            nxt, a, b = self.step(layers[-1])
            layers.append(nxt)
            alphas.append(a)
            betas.append(b)
        return AggregationState(layers, alphas, betas, self.context, self.kind, self.config,
                                _aggregator=self)

    def _scatter_matrices(self):
        if self._scatter is None:
            ent, rel = self.context.entity, self.context.relation
            n_e, n_r = ent.num_centers, rel.num_centers
            e_idx = np.concatenate([ent.center, ent.second, rel.first, rel.second])
            r_idx = np.concatenate([ent.first, rel.center])
            self._scatter = (_incidence(e_idx, n_e), _incidence(r_idx, n_r))
        return self._scatter

    def _step_fused(self, tables):
        E, R = tables.entity, tables.relation
        E2, R2 = E, R
        alpha = beta = None
        kind = int(self.kind)
        if self._use_ent:
            star = self.context.entity
            alpha = np.empty(len(star))
            E2 = E.copy()
            _kernels.entity_forward(kind, E, R, star.offsets, star.first, star.second, alpha, E2)
        if self._use_rel:
            star = self.context.relation
            beta = np.empty(len(star))
            R2 = R.copy()
            _kernels.relation_forward(kind, E, R, star.offsets, star.first, star.second, beta, R2)
        return EmbeddingTables(E2, R2), alpha, beta

    def _step_backward_fused(self, tables, alpha, beta, grad):
        E, R = tables.entity, tables.relation
        gE, gR = grad.entity.copy(), grad.relation.copy()
        kind = int(self.kind)
        if alpha is not None:
            star = self.context.entity
            _kernels.entity_backward(kind, E, R, star.offsets, star.first, star.second, alpha,
                                     grad.entity, gE, gR)
        if beta is not None:
            star = self.context.relation
            _kernels.relation_backward(kind, E, R, star.offsets, star.first, star.second, beta,
                                       grad.relation, gE, gR)
        return EmbeddingTables(gE, gR)

    def step_backward(self, tables, alpha, beta, grad):
        """Pull gradients w.r.t. layer ``l+1`` back to layer ``l``."""
        if self.backend == "numba":
            return self._step_backward_fused(tables, alpha, beta, grad)
        E, R = tables.entity, tables.relation
        gE_next, gR_next = grad.entity, grad.relation
        ent, rel = self.context.entity, self.context.relation
        d = E.shape[1]
        kind = self.kind
        zeros_e = np.zeros((len(ent), d))
        zeros_r = np.zeros((len(rel), d))
        g_center_e, g_tail_e, g_rel_e = zeros_e, zeros_e, zeros_e
        g_head_r, g_tail_r, g_center_r = zeros_r, zeros_r, zeros_r

        if alpha is not None:
            seg = self._ent_seg
            H, A, B = E[ent.center], R[ent.first], E[ent.second]
            g_up = gE_next[ent.center]
            msg = phi_rows(kind, A, B)
            g_alpha = np.sum(g_up * msg, axis=-1)
            gA_msg, gB_msg = phi_rows_backward(kind, A, B, alpha[:, None] * g_up)
            gs = seg.softmax_backward(alpha, g_alpha)
            gH, gA, gB = score_rows_backward(kind, H, A, B, gs)
            g_center_e, g_rel_e, g_tail_e = gH, gA + gA_msg, gB + gB_msg

        if beta is not None:
            seg = self._rel_seg
            H, C, T = E[rel.first], R[rel.center], E[rel.second]
            g_up = gR_next[rel.center]
            msg = phi_rows(kind, H, T)
            g_beta = np.sum(g_up * msg, axis=-1)
            gH_msg, gT_msg = phi_rows_backward(kind, H, T, beta[:, None] * g_up)
            gs = seg.softmax_backward(beta, g_beta)
            gH, gC, gT = score_rows_backward(kind, H, C, T, gs)
            g_head_r, g_center_r, g_tail_r = gH + gH_msg, gC, gT + gT_msg

        scat_e, scat_r = self._scatter_matrices()
        gE = gE_next + scat_e @ np.concatenate([g_center_e, g_tail_e, g_head_r, g_tail_r])
        gR = gR_next + scat_r @ np.concatenate([g_rel_e, g_center_r])
        return EmbeddingTables(gE, gR)


@dataclass
class AggregationState:
    """Every layer ``e^(0) .. e^(L)`` plus the attention used to produce each one.

    ``entity_attention[l]`` is a flat array aligned with ``context.entity``
    (``None`` when entity context is switched off); likewise for relations.
    """

    layers: list
    entity_attention: list
    relation_attention: list
    context: object
    kind: ModelKind
    config: AggregationConfig
    _aggregator: Aggregator = field(default=None, repr=False)

    @property
    def base(self):
        return self.layers[0]

    @property
    def final(self):
        return self.layers[-1]

    @property
    def num_iterations(self):
        return len(self.layers) - 1

    def alpha(self, l, h):
        """Attention of entity ``h`` over its context at iteration ``l``."""
        w = self.entity_attention[l]
        lo, hi = self.context.entity.offsets[h], self.context.entity.offsets[h + 1]
        return None if w is None else w[lo:hi]

    def beta(self, l, r):
        w = self.relation_attention[l]
        lo, hi = self.context.relation.offsets[r], self.context.relation.offsets[r + 1]
        return None if w is None else w[lo:hi]

    def backward(self, grad_final):
        """Gradient w.r.t. the base tables given the gradient w.r.t. the final layer."""
        g = grad_final
        agg = self._aggregator
        for l in reversed(range(self.num_iterations)):
            g = agg.step_backward(self.layers[l], self.entity_attention[l],
                                  self.relation_attention[l], g)
        return g


def attention_entity(h, tables, context, kind):
    """Softmax of ``psi(e_h, e_r', e_t')`` over the context of entity ``h``."""
    lo, hi = context.entity.offsets[h], context.entity.offsets[h + 1]
    if hi == lo:
        raise ValueError(f"entity {h} has an empty context")
    r, t = context.entity.first[lo:hi], context.entity.second[lo:hi]
    E, R = tables.entity, tables.relation
    s = score_rows(ModelKind.parse(kind), np.broadcast_to(E[h], (hi - lo, E.shape[1])), R[r], E[t])
    return _segment_softmax(s)


def attention_relation(r, tables, context, kind):
    """Softmax of ``psi(e_h', e_r, e_t')`` over the context of relation ``r``."""
    lo, hi = context.relation.offsets[r], context.relation.offsets[r + 1]
    if hi == lo:
        raise ValueError(f"relation {r} has an empty context")
    h, t = context.relation.first[lo:hi], context.relation.second[lo:hi]
    E, R = tables.entity, tables.relation
    s = score_rows(ModelKind.parse(kind), E[h], np.broadcast_to(R[r], (hi - lo, R.shape[1])), E[t])
    return _segment_softmax(s)


def aggregate_step(tables, context, kind, variant=Variant.BOTH, backend="numba"):
    cfg = AggregationConfig(1, variant)
    return Aggregator(context, kind, cfg, backend).step(tables)[0]


def aggregate(base, context, kind, config=None, backend="numba"):
    return Aggregator(context, kind, config, backend).run(base)
