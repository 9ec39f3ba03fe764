"""Graph-neighbourhood rating prediction.

A rating is predicted as the similarity-weighted mean of the ratings that
graph neighbours gave. When no neighbour qualifies the active user's own
mean is used, then the global training mean.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFeatures, EmptyNeighborhood, IndexOutOfRange, TooFewItems
from .graph import WeightedGraph
from .ingest import InteractionMatrix
from .learn import LearnConfig, learn_graph

GRAPH = "graph-neighbors"
USER_MEAN = "user-mean"
GLOBAL_MEAN = "global-mean"
SOURCES = (GRAPH, USER_MEAN, GLOBAL_MEAN)


class PredictionQuery(NamedTuple):
    user: int
    item: int


@dataclass(frozen=True)
class Prediction:
    value: float
    source: str
    contributing_neighbors: int = 0


def weighted_sum(pairs) -> float:
    """sum(s * r) / sum(s) over ``(s, r)`` pairs with s > 0."""
    pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=float)
    if pairs.size == 0:
        raise EmptyNeighborhood("no neighbours to average")
    pairs = pairs.reshape(-1, 2)
    s, r = pairs[:, 0], pairs[:, 1]
    if np.any(s <= 0):
        raise ValueError("similarity weights must be strictly positive")
    # the mean is convex in r; clip away rounding that escapes [min r, max r]
    return float(np.clip(np.dot(s, r) / s.sum(), r.min(), r.max()))


def _clamp(value, meta):
    return float(min(max(value, meta.scale_min), meta.scale_max))


def _fallback(m: InteractionMatrix, user: int) -> Prediction:
    if m.user_counts()[user] > 0:
        return Prediction(_clamp(m.user_means()[user], m.meta), USER_MEAN, 0)
    return Prediction(_clamp(m.global_mean(), m.meta), GLOBAL_MEAN, 0)


def _check_query(m, q):
    user, item = int(q[0]), int(q[1])
    if not 0 <= user < m.n_users:
        raise IndexOutOfRange(f"user index {user} outside [0, {m.n_users})")
    if not 0 <= item < m.n_items:
        raise IndexOutOfRange(f"item index {item} outside [0, {m.n_items})")
    return user, item


def predict_user_based(g: WeightedGraph, m: InteractionMatrix, q) -> Prediction:
    """Predict ``q.user``'s rating of ``q.item`` from graph-adjacent raters."""
    if g.node_count != m.n_users:
        raise ValueError(f"graph has {g.node_count} nodes, matrix has {m.n_users} users")
    user, item = _check_query(m, q)
    nbrs, weights = g.neighbors(user)
    raters, ratings = m.raters(item)
    common, in_nbrs, in_raters = np.intersect1d(nbrs, raters, assume_unique=True, return_indices=True)
    if len(common):
        value = weighted_sum(np.column_stack([weights[in_nbrs], ratings[in_raters]]))
        return Prediction(_clamp(value, m.meta), GRAPH, len(common))
    return _fallback(m, user)


def predict_many(g: WeightedGraph, m: InteractionMatrix, users, items) -> list[Prediction]:
    return [predict_user_based(g, m, (u, i)) for u, i in zip(users, items)]


def item_query_graph(m: InteractionMatrix, user: int, item: int, cfg: LearnConfig):
    """Learn the per-query item graph over the target item plus the items
    ``user`` rated. Returns ``(graph, nodes, local index of target)``."""
    rated, _ = m.rated_items(user)
    rated = rated[rated != item]
    if len(rated) < cfg.k_base:
        raise TooFewItems(f"user {user} rated {len(rated)} items, need at least {cfg.k_base}")
    nodes = np.union1d(rated, [item])
    values, _ = m.csc()
    feat = values[:, nodes].T.toarray()
    graph = learn_graph(feat, cfg).graph
    return graph, nodes, int(np.searchsorted(nodes, item))


def predict_item_based(m: InteractionMatrix, q, cfg: LearnConfig) -> Prediction:
    """Predict from the items adjacent to the target in a per-query graph."""
    user, item = _check_query(m, q)
    if m.user_counts()[user] == 0:
        return Prediction(_clamp(m.global_mean(), m.meta), GLOBAL_MEAN, 0)
    try:
        graph, nodes, target = item_query_graph(m, user, item, cfg)
    except (TooFewItems, DegenerateFeatures):
        return _fallback(m, user)
    nbrs, weights = graph.neighbors(target)
    if len(nbrs) == 0:
        return _fallback(m, user)
    rated, ratings = m.rated_items(user)
    lookup = dict(zip(rated.tolist(), ratings.tolist()))
    pairs = [(w, lookup[int(nodes[k])]) for k, w in zip(nbrs, weights)]
    return Prediction(_clamp(weighted_sum(pairs), m.meta), GRAPH, len(pairs))


def query_config(cfg: LearnConfig, **overrides) -> LearnConfig:
    """Small-budget copy of ``cfg`` for per-query item graphs."""
    defaults = dict(max_iters=min(cfg.max_iters, 5), batch_size=min(cfg.batch_size, 10),
                    embed_dim=min(cfg.embed_dim, 10))
    defaults.update(overrides)
    return replace(cfg, **defaults)
