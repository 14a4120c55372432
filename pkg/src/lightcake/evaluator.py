"""Relation-prediction ranking and MRR / MR / Hit@k."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import ModelKind, candidate_scores

# elements of a (batch, candidates, dim) temporary before scoring is chunked
_CHUNK_ELEMENTS = 1 << 22


def query_chunks(num_queries, num_candidates, dim):
    step = max(1, _CHUNK_ELEMENTS // max(1, num_candidates * dim))
    for lo in range(0, num_queries, step):
        yield slice(lo, min(lo + step, num_queries))


def score_candidates(heads, tails, tables, kind, num_relations):
    """``(n, num_relations)`` scores of every original relation for each ``(h, t)`` pair."""
    kind = ModelKind.parse(kind)
    heads, tails = np.asarray(heads), np.asarray(tails)
    E, R = tables.entity, tables.relation[:num_relations]
    out = np.empty((len(heads), num_relations))
    for sl in query_chunks(len(heads), num_relations, E.shape[1]):
        out[sl] = candidate_scores(kind, E[heads[sl]], E[tails[sl]], R)
    return out


def mid_ranks(scores, true_idx):
    """Rank of the true candidate per row; ties share the mean of their positions.

    ``rank = 1 + #(better) + #(tied others) / 2``.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    true_idx = np.atleast_1d(np.asarray(true_idx))
    if np.any(true_idx < 0) or np.any(true_idx >= scores.shape[1]):
        raise IndexError("true relation id outside the candidate range")
    target = scores[np.arange(len(scores)), true_idx][:, None]
    better = np.sum(scores > target, axis=1)
    tied = np.sum(scores == target, axis=1) - 1
    return 1.0 + better + tied / 2.0


def rank_relation(h, t, r_true, final_tables, kind, num_relations):
    if not 0 <= r_true < num_relations:
        raise IndexError(f"relation {r_true} is not a candidate (expected [0, {num_relations}))")
    scores = score_candidates([h], [t], final_tables, kind, num_relations)
    return float(mid_ranks(scores, [r_true])[0])


@dataclass(frozen=True)
class MetricsReport:
    mrr: float
    mr: float
    hit3: float
    num_queries: int

    def as_dict(self):
        return dict(self.__dict__)

    def to_json(self):
        return json.dumps(self.as_dict())

    def format(self):
        return (f"{'queries':<8}{'MRR':>8}{'MR':>9}{'Hit@3':>8}\n"
                f"{self.num_queries:<8d}{self.mrr:>8.4f}{self.mr:>9.4f}{self.hit3:>8.4f}")


def hits_at(ranks, k):
    return float(np.mean(np.asarray(ranks) <= k))


def metrics_from_ranks(ranks):
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("cannot compute metrics over zero queries")
    return MetricsReport(mrr=float(np.mean(1.0 / ranks)), mr=float(np.mean(ranks)),
                         hit3=hits_at(ranks, 3), num_queries=int(ranks.size))


def rank_split(split, final_tables, kind, num_relations):
    split = np.asarray(split)
    if len(split) == 0:
        raise ValueError("cannot evaluate an empty split")
    scores = score_candidates(split[:, 0], split[:, 2], final_tables, kind, num_relations)
    return mid_ranks(scores, split[:, 1])


def evaluate(split, final_tables, kind, num_relations):
    """Raw (unfiltered) relation-prediction metrics over ``split``."""
    return metrics_from_ranks(rank_split(split, final_tables, kind, num_relations))
