import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tables
from lightcake.aggregator import (AggregationConfig, Aggregator, Variant, aggregate, aggregate_step,
                                  attention_entity, attention_relation)
from lightcake.context import build_context_index
from lightcake.dataset import build_dataset
from lightcake.model import EmbeddingTables, ModelKind, psi


def oracle_step(tables, aug, kind, use_ent=True, use_rel=True):
    """Plain-Python reference for one synchronous step."""
    E, R = tables.entity, tables.relation
    E2, R2 = E.copy(), R.copy()
    for x in range(len(E) if use_ent else 0):
        leaves = [(r, t) for h, r, t in aug if h == x]
        if not leaves:
            continue
        s = [psi(kind, E[x], R[r], E[t]) for r, t in leaves]
        m = max(s)
        w = [math.exp(v - m) for v in s]
        z = sum(w)
        for (r, t), wi in zip(leaves, w):
            msg = E[t] - R[r] if kind == ModelKind.TRANSE else E[t] * R[r]
            E2[x] = E2[x] + (wi / z) * msg
    for y in range(len(R) if use_rel else 0):
        leaves = [(h, t) for h, r, t in aug if r == y]
        if not leaves:
            continue
        s = [psi(kind, E[h], R[y], E[t]) for h, t in leaves]
        m = max(s)
        w = [math.exp(v - m) for v in s]
        z = sum(w)
        for (h, t), wi in zip(leaves, w):
            msg = E[t] - E[h] if kind == ModelKind.TRANSE else E[t] * E[h]
            R2[y] = R2[y] + (wi / z) * msg
    return EmbeddingTables(E2, R2)


def test_attention_example():
    # psi values 0, ln 2, ln 3 give weights 1/6, 2/6, 3/6
    ds = build_dataset([("h", "r", "a"), ("h", "r", "b"), ("h", "r", "c")])
    ctx = build_context_index(ds)
    E = np.array([[1.0], [0.0], [math.log(2)], [math.log(3)]])
    R = np.array([[1.0], [1.0]])
    alpha = attention_entity(0, EmbeddingTables(E, R), ctx, ModelKind.DISTMULT)
    np.testing.assert_allclose(alpha, [1 / 6, 2 / 6, 3 / 6], rtol=1e-12)


def test_single_leaf_gets_full_weight(toy):
    ctx = build_context_index(toy)
    tb = random_tables(toy, 4)
    assert attention_relation(1, tb, ctx, ModelKind.TRANSE).tolist() == [1.0]


def test_empty_context_raises():
    ds = build_dataset([("a", "r", "b")], [], [("a", "r", "z")])
    ctx = build_context_index(ds)
    with pytest.raises(ValueError):
        attention_entity(ds.entity_vocab["z"], random_tables(ds, 3), ctx, ModelKind.DISTMULT)


def test_empty_context_copies_through():
    ds = build_dataset([("a", "r", "b")], [], [("a", "r", "z")])
    ctx = build_context_index(ds)
    tb = random_tables(ds, 3)
    z = ds.entity_vocab["z"]
    out = aggregate(tb, ctx, ModelKind.DISTMULT, AggregationConfig(3))
    np.testing.assert_array_equal(out.final.entity[z], tb.entity[z])


@pytest.mark.parametrize("backend", ["numba", "numpy"])
@pytest.mark.parametrize("kind", list(ModelKind))
def test_one_step_matches_oracle(small_graph, kind, backend):
    ctx = build_context_index(small_graph)
    tb = random_tables(small_graph, 5, seed=1)
    got = aggregate_step(tb, ctx, kind, backend=backend)
    want = oracle_step(tb, small_graph.train_augmented.tolist(), kind)
    np.testing.assert_allclose(got.entity, want.entity, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(got.relation, want.relation, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("variant,use_ent,use_rel",
                         [(Variant.ENTITY_ONLY, True, False), (Variant.RELATION_ONLY, False, True)])
def test_variants_match_oracle(toy, variant, use_ent, use_rel):
    ctx = build_context_index(toy)
    tb = random_tables(toy, 3, seed=2)
    got = aggregate_step(tb, ctx, ModelKind.DISTMULT, variant)
    want = oracle_step(tb, toy.train_augmented.tolist(), ModelKind.DISTMULT, use_ent, use_rel)
    np.testing.assert_allclose(got.entity, want.entity, rtol=1e-12)
    np.testing.assert_allclose(got.relation, want.relation, rtol=1e-12)


def test_two_iterations_are_two_steps(toy):
    ctx = build_context_index(toy)
    tb = random_tables(toy, 3, seed=4)
    aug = toy.train_augmented.tolist()
    want = oracle_step(oracle_step(tb, aug, ModelKind.DISTMULT), aug, ModelKind.DISTMULT)
    got = aggregate(tb, ctx, ModelKind.DISTMULT, AggregationConfig(2)).final
    np.testing.assert_allclose(got.entity, want.entity, rtol=1e-12)
    np.testing.assert_allclose(got.relation, want.relation, rtol=1e-12)


def test_none_variant_and_zero_iterations_are_identity(small_graph):
    ctx = build_context_index(small_graph)
    tb = random_tables(small_graph, 4)
    for cfg in (AggregationConfig(0), AggregationConfig(3, Variant.NONE)):
        out = aggregate(tb, ctx, ModelKind.TRANSE, cfg)
        assert out.final.equals(tb)
        assert out.num_iterations == 0


@pytest.mark.parametrize("kind", list(ModelKind))
def test_attention_normalized(small_graph, kind):
    ctx = build_context_index(small_graph)
    state = aggregate(random_tables(small_graph, 6), ctx, kind, AggregationConfig(2))
    for l in range(2):
        for h in range(small_graph.num_entities):
            a = state.alpha(l, h)
            if len(a):
                assert np.all(a >= 0) and abs(a.sum() - 1) < 1e-9
        for r in range(small_graph.num_relations_augmented):
            b = state.beta(l, r)
            if len(b):
                assert np.all(b >= 0) and abs(b.sum() - 1) < 1e-9


def test_state_attention_matches_direct(small_graph):
    ctx = build_context_index(small_graph)
    tb = random_tables(small_graph, 6, seed=8)
    state = aggregate(tb, ctx, ModelKind.DISTMULT, AggregationConfig(1))
    for h in range(5):
        np.testing.assert_allclose(state.alpha(0, h), attention_entity(h, tb, ctx, ModelKind.DISTMULT),
                                   rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-50, 50), seed=st.integers(0, 1000))
def test_softmax_shift_invariance(shift, seed):
    # with d=1 DistMult and e_h = e_r = 1, scores are the tail values; adding
    # a constant to every tail shifts every score equally
    ds = build_dataset([("h", "r", "a"), ("h", "r", "b"), ("h", "r", "c")])
    ctx = build_context_index(ds)
    rng = np.random.default_rng(seed)
    E = np.vstack([[1.0], rng.normal(size=(3, 1))])
    R = np.ones((2, 1))
    a = attention_entity(0, EmbeddingTables(E, R), ctx, ModelKind.DISTMULT)
    E2 = E.copy()
    E2[1:] += shift
    b = attention_entity(0, EmbeddingTables(E2, R), ctx, ModelKind.DISTMULT)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


@pytest.mark.parametrize("kind", list(ModelKind))
@pytest.mark.parametrize("variant", list(Variant))
def test_backends_agree(small_graph, kind, variant):
    ctx = build_context_index(small_graph)
    tb = random_tables(small_graph, 5, seed=3)
    cfg = AggregationConfig(3, variant)
    a = Aggregator(ctx, kind, cfg, "numba").run(tb)
    b = Aggregator(ctx, kind, cfg, "numpy").run(tb)
    np.testing.assert_allclose(a.final.entity, b.final.entity, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(a.final.relation, b.final.relation, rtol=1e-11, atol=1e-12)
    g = EmbeddingTables(np.ones_like(tb.entity), np.ones_like(tb.relation))
    ga, gb = a.backward(g), b.backward(g)
    np.testing.assert_allclose(ga.entity, gb.entity, rtol=1e-10, atol=1e-11)
    np.testing.assert_allclose(ga.relation, gb.relation, rtol=1e-10, atol=1e-11)


def test_unknown_backend(toy):
    with pytest.raises(ValueError):
        Aggregator(build_context_index(toy), ModelKind.TRANSE, backend="cuda")


def test_variant_parse():
    assert Variant.parse("ent") is Variant.ENTITY_ONLY
    assert Variant.parse("none") is Variant.NONE
    assert Variant.parse("both") is Variant.BOTH
    with pytest.raises(ValueError):
        Variant.parse("all")


def test_negative_iterations_rejected():
    with pytest.raises(ValueError):
        AggregationConfig(-1)
