import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcf.errors import DegenerateFeatures
from graphcf.graph import ObjectiveParams, WeightedGraph, edge_count, effective_resistance, objective, precision
from graphcf.ingest import from_arrays, to_matrix
from graphcf.learn import (
    LearnConfig,
    edge_budget,
    knn_graph,
    learn_graph,
    learn_user_graph,
    nearest_neighbors,
    pairwise_distances,
    refine,
    refine_graph,
    score_candidates,
    similarity_weights,
    spectral_embedding,
)

from conftest import random_graph, two_clusters


def brute_knn_edges(x, k, metric):
    """Exhaustive kNN with index tie-breaking, union-symmetrized."""
    n = len(x)
    edges = set()
    for i in range(n):
        d = []
        for j in range(n):
            if i == j:
                continue
            if metric == "euclidean":
                dist = float(np.linalg.norm(x[i] - x[j]))
            else:
                dist = 1.0 - float(x[i] @ x[j] / np.linalg.norm(x[i]) / np.linalg.norm(x[j]))
            d.append((round(dist, 12), j))
        for _, j in sorted(d)[:k]:
            edges.add((min(i, j), max(i, j)))
    return edges


# -- kNN ------------------------------------------------------------------

def test_knn_collinear():
    g = knn_graph(np.array([[0.0], [1.0], [10.0]]), 1, "euclidean")
    assert g.edge_set() == {(0, 1), (1, 2)} == brute_knn_edges(np.array([[0.0], [1.0], [10.0]]), 1, "euclidean")


def test_knn_two_nodes_weight():
    g = knn_graph(np.array([[0.0, 0.0], [3.0, 4.0]]), 1, "euclidean")
    assert g.edges == [(0, 1, pytest.approx(np.exp(-1.0)))]


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_knn_matches_brute_force(rng, metric, k):
    x = rng.integers(0, 6, size=(40, 7)).astype(float)
    x[x.sum(axis=1) == 0, 0] = 1.0
    g = knn_graph(x, k, metric)
    assert g.edge_set() == brute_knn_edges(x, k, metric)
    assert edge_count(g) <= k * len(x)
    assert np.all((g.weights > 0) & (g.weights <= 1))


def test_knn_ties_prefer_smaller_index():
    x = np.array([[0.0], [1.0], [-1.0], [2.0]])
    idx, _ = nearest_neighbors(x, 1, "euclidean")
    # node 0 is equidistant from 1 and 2
    assert idx[0, 0] == 1


def test_knn_self_tuning_bandwidth():
    x = np.array([[0.0], [1.0], [3.0]])
    g = knn_graph(x, 1, "euclidean")
    # k-th neighbour distances: 1, 1, 2 -> bandwidth (1 + 1 + 4) / 3
    s2 = 2.0
    assert dict(((i, j), w) for i, j, w in g.edges) == {
        (0, 1): pytest.approx(np.exp(-1 / s2)), (1, 2): pytest.approx(np.exp(-4 / s2))}


def test_knn_cosine_zero_row():
    with pytest.raises(DegenerateFeatures):
        knn_graph(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 1, "cosine")


def test_knn_k_too_large():
    with pytest.raises(ValueError):
        knn_graph(np.eye(3), 3)


def test_pairwise_cosine_identical_rows_zero():
    d = pairwise_distances(np.array([[1.0, 2.0], [2.0, 4.0], [1.0, 0.0]]), "cosine")
    assert d[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_similarity_weights():
    x = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    g = similarity_weights(WeightedGraph.from_edges(3, [(0, 1, 0.3), (0, 2, 0.3)]), x)
    assert g.edges == [(0, 1, pytest.approx(1 / np.sqrt(2))), (0, 2, 1e-12)]


# -- spectral embedding ---------------------------------------------------

def test_embedding_edgeless():
    emb = spectral_embedding(WeightedGraph(6), ObjectiveParams(sigma=1.0), 3)
    np.testing.assert_allclose(emb.eigenvalues, 1.0)
    v = emb.eigenvectors
    assert emb.dist2(0, 4) == pytest.approx(np.sum((v[0] - v[4]) ** 2))


def test_embedding_path_eigenvalues():
    g = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    emb = spectral_embedding(g, ObjectiveParams(sigma=1.0), 3)
    oracle = np.linalg.eigvalsh(np.array([[2.0, -1, 0], [-1, 3, -1], [0, -1, 2]]))
    np.testing.assert_allclose(emb.eigenvalues, oracle, atol=1e-12)
    np.testing.assert_allclose(oracle, [1, 2, 4], atol=1e-12)


@pytest.mark.parametrize("n", [5, 17, 30])
def test_full_embedding_equals_resistance(rng, n):
    g = random_graph(rng, n, p=0.2, connected=True)
    p = ObjectiveParams(sigma=0.8)
    emb = spectral_embedding(g, p, n)
    for i, j in itertools.combinations(range(n), 2):
        assert emb.dist2(i, j) == pytest.approx(effective_resistance(g, p, i, j), abs=1e-8)


def test_truncated_embedding_is_lower_bound(rng):
    g = random_graph(rng, 20, p=0.2, connected=True)
    p = ObjectiveParams(sigma=1.0)
    emb = spectral_embedding(g, p, 6)
    for i, j in itertools.combinations(range(20), 2):
        assert emb.dist2(i, j) <= effective_resistance(g, p, i, j) + 1e-12


def test_sparse_eigensolver_path(rng):
    # large enough to use the shift-invert Lanczos branch
    g = random_graph(rng, 400, p=0.01, connected=True)
    p = ObjectiveParams(sigma=1.0)
    emb = spectral_embedding(g, p, 8, seed=3)
    dense = np.linalg.eigvalsh(precision(g, 1.0).toarray())[:8]
    np.testing.assert_allclose(emb.eigenvalues, dense, rtol=1e-8)


# -- candidate scoring ----------------------------------------------------

def six_node_instance():
    x = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]])
    # cluster {0,1,2} lacks (0, 2); cluster {3,4,5} is a triangle; one bridge
    base = WeightedGraph.from_edges(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0),
                                        (3, 5, 1.0), (2, 3, 0.01)])
    return x, base


def test_six_node_candidates_prefer_missing_link():
    x, base = six_node_instance()
    cfg = LearnConfig(k_pool=5, embed_dim=6, beta=1e-3, sigma=1.0, metric="euclidean")
    emb = spectral_embedding(base, cfg.params, 6)
    cands = score_candidates(x, emb, base, cfg)
    theta_inv = np.linalg.inv(precision(base, 1.0).toarray())
    gains = {}
    for c in cands:
        e = np.zeros(6)
        e[c.i], e[c.j] = 1.0, -1.0
        exact = e @ theta_inv @ e - np.sum((x[c.i] - x[c.j]) ** 2) / 1 - 4 * cfg.beta
        assert c.gain == pytest.approx(exact, abs=1e-9)
        # finite-difference slope of the objective at zero weight
        h = 1e-7
        fd = (objective(base.with_edges([c.i], [c.j], [h]), x, cfg.params)
              - objective(base, x, cfg.params)) / h
        assert c.gain == pytest.approx(fd, abs=1e-4)
        gains[(c.i, c.j)] = c.gain
    cross = [g for (i, j), g in gains.items() if (i < 3) != (j < 3)]
    assert gains[(0, 2)] > max(cross)
    assert [(c.i, c.j) for c in cands][0] == (0, 2)


def test_candidates_duplicate_rows_gain_is_embedding_distance():
    x = np.array([[1.0, 2.0], [1.0, 2.0], [9.0, 9.0], [9.0, 8.0]])
    base = WeightedGraph.from_edges(4, [(0, 2, 1.0), (1, 3, 1.0)])
    cfg = LearnConfig(k_pool=3, embed_dim=4, beta=0.0, sigma=1.0, metric="euclidean")
    emb = spectral_embedding(base, cfg.params, 4)
    c = next(c for c in score_candidates(x, emb, base, cfg) if (c.i, c.j) == (0, 1))
    assert c.data_dist2 == 0.0
    assert c.gain == pytest.approx(c.embed_dist2) and c.gain > 0


def test_candidates_large_beta_all_negative():
    x, base = six_node_instance()
    cfg = LearnConfig(k_pool=5, embed_dim=6, beta=10.0, sigma=1.0, metric="euclidean")
    emb = spectral_embedding(base, cfg.params, 6)
    cands = score_candidates(x, emb, base, cfg)
    assert cands and all(c.gain < 0 for c in cands)
    assert all(not base.has_edge(c.i, c.j) and c.i < c.j for c in cands)


def test_candidates_sorted():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 3))
    cfg = LearnConfig(k_pool=6, embed_dim=5, metric="euclidean")
    base = knn_graph(x, 2, "euclidean")
    cands = score_candidates(x, spectral_embedding(base, cfg.params, 5), base, cfg)
    keys = [(-c.gain, c.i, c.j) for c in cands]
    assert keys == sorted(keys)


# -- refinement -----------------------------------------------------------

def cluster_config(**kw):
    base = dict(k_base=2, k_pool=8, embed_dim=10, batch_size=8, edge_budget_ratio=1.5,
                beta=1e-4, sigma=3.0, metric="euclidean")
    base.update(kw)
    return LearnConfig(**base)


def test_refine_large_beta_returns_base(rng):
    x = two_clusters(rng, 10)
    base = knn_graph(x, 2, "euclidean")
    assert refine_graph(base, x, cluster_config(beta=100.0)) == base


def test_refine_unit_budget_returns_base(rng):
    x = two_clusters(rng, 10)
    base = knn_graph(x, 2, "euclidean")
    assert refine_graph(base, x, cluster_config(edge_budget_ratio=1.0)) == base


def test_refine_two_clusters_improves_objective(rng):
    x = two_clusters(rng, 10)
    cfg = cluster_config()
    base = knn_graph(x, 2, "euclidean")
    res = refine(base, x, cfg)
    assert res.accepted
    for b in res.accepted:
        assert b.objective_after > b.objective_before
    base_obj = objective(base, x, cfg.params)
    final_obj = objective(res.graph, x, cfg.params)
    assert final_obj == pytest.approx(res.objective, rel=1e-12)
    assert final_obj > base_obj
    assert base.edge_set() <= res.graph.edge_set()
    assert len(res.graph) <= edge_budget(base, cfg.edge_budget_ratio)
    # the added edges stay inside the clusters
    added = res.graph.edge_set() - base.edge_set()
    assert all((i < 10) == (j < 10) for i, j in added)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(8, 64), ratio=st.sampled_from([1.0, 1.1, 1.5, 3.0]))
def test_refine_invariants(seed, n, ratio):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    cfg = cluster_config(edge_budget_ratio=ratio, sigma=rng.choice([1.0, 3.0, 10.0]))
    base = knn_graph(x, 2, "euclidean")
    res = refine(base, x, cfg)
    assert base.edge_set() <= res.graph.edge_set()
    assert len(res.graph) <= edge_budget(base, ratio)
    for b in res.accepted:
        assert b.objective_after > b.objective_before
    assert res.objective >= res.base_objective


def test_learn_deterministic(rng):
    x = two_clusters(rng, 15, dim=3)
    cfg = cluster_config(seed=5)
    assert learn_graph(x, cfg).graph == learn_graph(x.copy(), cfg).graph


def test_learn_config_validation():
    with pytest.raises(ValueError):
        LearnConfig(sigma=0.0)
    with pytest.raises(ValueError):
        LearnConfig(k_base=3, k_pool=2)
    with pytest.raises(ValueError):
        LearnConfig(edge_budget_ratio=0.9)
    with pytest.raises(ValueError):
        LearnConfig(metric="manhattan")
    assert LearnConfig(metric="cosine-distance").metric == "cosine"


# -- user graphs ----------------------------------------------------------

def test_identical_users_adjacent():
    users = [1, 1, 1, 2, 2, 2, 3, 3, 4]
    items = [1, 2, 3, 1, 2, 3, 4, 1, 2]
    ratings = [5, 3, 1, 5, 3, 1, 2, 4, 4]
    m = to_matrix(from_arrays(users, items, ratings))
    g = learn_user_graph(m, LearnConfig(k_base=1, k_pool=2, embed_dim=2))
    assert g.has_edge(0, 1)


def test_single_user_fails():
    m = to_matrix(from_arrays([1, 1], [1, 2], [3, 4]))
    with pytest.raises(ValueError):
        learn_user_graph(m, LearnConfig())


@pytest.mark.movielens
def test_movielens_user_graph(movielens_split):
    _, train, _ = movielens_split
    m = to_matrix(train)
    x = m.dense()
    cfg = LearnConfig()
    res = learn_graph(x, cfg)
    assert len(res.graph) <= 1.15 * len(res.base)
    assert res.accepted, "default settings should accept at least one batch"
    assert objective(res.graph, x, cfg.params) > objective(res.base, x, cfg.params)
