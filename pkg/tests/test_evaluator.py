import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tables
from lightcake.evaluator import (evaluate, hits_at, metrics_from_ranks, mid_ranks, rank_relation,
                                 rank_split, score_candidates)
from lightcake.model import EmbeddingTables, ModelKind, psi


def sort_oracle(scores, true_idx):
    """Mean of the 1-based positions occupied by the true score's tie group."""
    order = sorted(scores, reverse=True)
    positions = [i + 1 for i, s in enumerate(order) if s == scores[true_idx]]
    return sum(positions) / len(positions)


class TestMidRank:
    def test_strict_best(self):
        assert mid_ranks([[3.0, 1.0, 2.0]], [0]).tolist() == [1.0]

    def test_strict_last(self):
        assert mid_ranks([[3.0, 1.0, 2.0]], [1]).tolist() == [3.0]

    def test_two_way_tie(self):
        assert mid_ranks([[2.0, 2.0, 1.0]], [0]).tolist() == [1.5]

    def test_all_tied(self):
        assert mid_ranks([[0.0] * 4], [2]).tolist() == [2.5]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            mid_ranks([[1.0, 2.0]], [2])

    @settings(max_examples=200)
    @given(st.lists(st.integers(-3, 3), min_size=1, max_size=12), st.data())
    def test_matches_sort_oracle(self, scores, data):
        i = data.draw(st.integers(0, len(scores) - 1))
        got = mid_ranks([np.array(scores, float)], [i])[0]
        assert got == sort_oracle(scores, i)
        assert 1 <= got <= len(scores)

    @given(st.lists(st.integers(-5, 5), min_size=2, max_size=10, unique=True))
    def test_unique_argmax_ranks_first(self, scores):
        assert mid_ranks([np.array(scores, float)], [int(np.argmax(scores))])[0] == 1.0


class TestMetrics:
    def test_example(self):
        m = metrics_from_ranks([1, 2, 4])
        assert m.mrr == pytest.approx((1 + 0.5 + 0.25) / 3)
        assert m.mr == pytest.approx(7 / 3)
        assert m.hit3 == pytest.approx(2 / 3)
        assert m.num_queries == 3

    def test_perfect(self):
        m = metrics_from_ranks([1.0] * 5)
        assert (m.mrr, m.mr, m.hit3) == (1.0, 1.0, 1.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            metrics_from_ranks([])

    def test_hits_with_half_ranks(self):
        assert hits_at([3.0, 3.5], 3) == 0.5

    def test_json_round_trip(self):
        import json
        m = metrics_from_ranks([1, 3])
        assert json.loads(m.to_json()) == m.as_dict()


@pytest.mark.parametrize("kind", list(ModelKind))
def test_scores_match_psi(small_graph, kind):
    tb = random_tables(small_graph, 5)
    split = small_graph.test
    s = score_candidates(split[:, 0], split[:, 2], tb, kind, small_graph.num_relations)
    E, R = tb.entity, tb.relation
    for i, (h, _, t) in enumerate(split.tolist()):
        for r in range(small_graph.num_relations):
            assert s[i, r] == psi(kind, E[h], R[r], E[t])


def test_inverse_relations_not_candidates(small_graph):
    tb = random_tables(small_graph, 3)
    # making every inverse relation score perfectly must not change any rank
    R = tb.relation.copy()
    R[small_graph.num_relations:] = 100.0
    a = rank_split(small_graph.test, tb, ModelKind.DISTMULT, small_graph.num_relations)
    b = rank_split(small_graph.test, EmbeddingTables(tb.entity, R), ModelKind.DISTMULT,
                   small_graph.num_relations)
    np.testing.assert_array_equal(a, b)


def test_rank_relation_agrees_with_split(small_graph):
    tb = random_tables(small_graph, 4, seed=2)
    ranks = rank_split(small_graph.valid, tb, ModelKind.TRANSE, small_graph.num_relations)
    for (h, r, t), want in zip(small_graph.valid.tolist(), ranks):
        assert rank_relation(h, t, r, tb, ModelKind.TRANSE, small_graph.num_relations) == want
    with pytest.raises(IndexError):
        rank_relation(0, 1, small_graph.num_relations, tb, ModelKind.TRANSE, small_graph.num_relations)


def test_evaluate_bounds(small_graph):
    m = evaluate(small_graph.test, random_tables(small_graph, 4), ModelKind.DISTMULT,
                 small_graph.num_relations)
    k = small_graph.num_relations
    assert 1 / k <= m.mrr <= 1 and 1 <= m.mr <= k and 0 <= m.hit3 <= 1


def test_chunking_does_not_change_scores(small_graph, monkeypatch):
    from lightcake import evaluator
    tb = random_tables(small_graph, 4)
    split = small_graph.train
    full = score_candidates(split[:, 0], split[:, 2], tb, ModelKind.TRANSE, small_graph.num_relations)
    monkeypatch.setattr(evaluator, "_CHUNK_ELEMENTS", 7)
    chunked = score_candidates(split[:, 0], split[:, 2], tb, ModelKind.TRANSE, small_graph.num_relations)
    np.testing.assert_array_equal(full, chunked)
