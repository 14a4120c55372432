"""Embedding tables and the TransE / DistMult scoring families.

Each family supplies a scoring function ``psi``, its two-step decomposition
(``encode_triple`` followed by ``reduce_score``) and the parameter-free
context encoders ``phi_ent`` / ``phi_rel``. The row-wise ``*_rows`` helpers are
the batched forms the aggregator and trainer use, with matching backward
functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class ModelKind(enum.IntEnum):
    TRANSE = 0
    DISTMULT = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return cls(int(value))
        key = str(value).strip().lower()
        for kind in cls:
            if kind.name.lower() == key:
                return kind
        raise ValueError(f"unknown model kind {value!r}; expected transe or distmult")

    @property
    def label(self):
        return {ModelKind.TRANSE: "transe", ModelKind.DISTMULT: "distmult"}[self]


@dataclass
class EmbeddingTables:
    entity: np.ndarray
    relation: np.ndarray

    @property
    def dim(self):
        return self.entity.shape[1]

    @property
    def num_parameters(self):
        return self.entity.size + self.relation.size

    def copy(self):
        return EmbeddingTables(self.entity.copy(), self.relation.copy())

    def equals(self, other):
        return (np.array_equal(self.entity, other.entity)
                and np.array_equal(self.relation, other.relation))


def init_embeddings(num_entities, num_relations_augmented, dim, seed):
    """Draw every entry i.i.d. from ``U[-6/sqrt(d), 6/sqrt(d)]``."""
    if dim < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {dim}")
    bound = 6.0 / np.sqrt(dim)
    rng = np.random.default_rng(seed)
    ent = rng.uniform(-bound, bound, size=(num_entities, dim))
    rel = rng.uniform(-bound, bound, size=(num_relations_augmented, dim))
    return EmbeddingTables(ent, rel)


def _check(*vecs):
    vecs = [np.asarray(v, dtype=np.float64) for v in vecs]
    shape = vecs[0].shape
    for v in vecs[1:]:
        if v.shape != shape:
            raise ValueError(f"dimension mismatch: {shape} vs {v.shape}")
    return vecs


# All score paths share one arithmetic order (t - r - h, then a last-axis sum;
# (h * r) * t, then a last-axis sum) so that batched and single-triple scores
# agree bit for bit.

def psi_transe(e_h, e_r, e_t):
    e_h, e_r, e_t = _check(e_h, e_r, e_t)
    v = e_t - e_r - e_h
    return -float(np.sqrt(np.sum(v * v, axis=-1)))


def psi_distmult(e_h, e_r, e_t):
    e_h, e_r, e_t = _check(e_h, e_r, e_t)
    return float(np.sum(e_h * e_r * e_t, axis=-1))


def psi(kind, e_h, e_r, e_t):
    return psi_transe(e_h, e_r, e_t) if kind == ModelKind.TRANSE else psi_distmult(e_h, e_r, e_t)


def encode_triple(kind, e_h, e_r, e_t):
    e_h, e_r, e_t = _check(e_h, e_r, e_t)
    if kind == ModelKind.TRANSE:
        return e_t - e_r - e_h
    return e_h * e_r * e_t


def reduce_score(kind, v):
    v = np.asarray(v, dtype=np.float64)
    if kind == ModelKind.TRANSE:
        return -float(np.sqrt(np.sum(v * v, axis=-1)))
    return float(np.sum(v, axis=-1))


def phi_ent(kind, e_r, e_t):
    """Message from a ``(relation, tail)`` leaf to its center entity."""
    e_r, e_t = _check(e_r, e_t)
    return e_t - e_r if kind == ModelKind.TRANSE else e_t * e_r


def phi_rel(kind, e_h, e_t):
    """Message from a ``(head, tail)`` leaf to its center relation."""
    e_h, e_t = _check(e_h, e_t)
    return e_t - e_h if kind == ModelKind.TRANSE else e_t * e_h


# Row-wise forms. Inputs are (n, d) arrays; scores are (n,).

def score_rows(kind, H, R, T):
    if kind == ModelKind.TRANSE:
        v = T - R - H
        return -np.sqrt(np.sum(v * v, axis=-1))
    return np.sum(H * R * T, axis=-1)


def score_rows_backward(kind, H, R, T, g):
    """Gradients of ``sum(g * score_rows(H, R, T))`` w.r.t. H, R and T."""
    if kind == ModelKind.TRANSE:
        v = T - R - H
        norm = np.sqrt(np.sum(v * v, axis=-1))
        # subgradient 0 at v == 0
        coef = np.divide(-g, norm, out=np.zeros_like(norm), where=norm > 0)
        gv = coef[:, None] * v
        return -gv, -gv, gv
    g = g[:, None]
    return g * R * T, g * H * T, g * H * R


def phi_rows(kind, A, B):
    """Row-wise context encoder ``phi(a, b)``; ``a`` is the relation (entity
    context) or head (relation context), ``b`` is the tail."""
    return B - A if kind == ModelKind.TRANSE else B * A


def phi_rows_backward(kind, A, B, g):
    if kind == ModelKind.TRANSE:
        return -g, g
    return g * B, g * A


def candidate_scores(kind, E_h, E_t, R):
    """Scores of every candidate relation for each ``(h, t)`` pair: ``(b, d), (b, d), (k, d) -> (b, k)``."""
    return score_rows(kind, E_h[:, None, :], R[None, :, :], E_t[:, None, :])


def candidate_scores_backward(kind, E_h, E_t, R, g):
    """Gradients of ``sum(g * candidate_scores(...))`` w.r.t. E_h, E_t and R."""
    if kind == ModelKind.TRANSE:
        v = E_t[:, None, :] - R[None, :, :] - E_h[:, None, :]
        norm = np.sqrt(np.sum(v * v, axis=-1))
        coef = np.divide(-g, norm, out=np.zeros_like(norm), where=norm > 0)
        gv = coef[:, :, None] * v
        gt = gv.sum(axis=1)
        return -gt, gt, -gv.sum(axis=0)
    ht = E_h * E_t
    gr = np.einsum("bk,bd->kd", g, ht)
    gw = np.einsum("bk,kd->bd", g, R)
    return gw * E_t, gw * E_h, gr
