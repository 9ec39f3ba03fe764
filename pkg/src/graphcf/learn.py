"""Sparse user/item graph learning.

A small-k nearest-neighbour graph is built first and then grown by greedy
edge augmentation. Each round embeds the nodes with the lowest eigenpairs
of the precision matrix, scores candidate pairs by an estimate of the
objective's gradient with respect to a new edge weight, and keeps a batch
only if the exact objective goes up.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateFeatures, EigensolverNoConvergence
from .graph import ObjectiveParams, WeightedGraph, objective, precision

log = logging.getLogger(__name__)

METRICS = ("euclidean", "cosine")
_METRIC_ALIASES = {"cosine-distance": "cosine", "cosine_distance": "cosine"}

# smallest positive weight an edge may carry after exp() underflow
_MIN_WEIGHT = np.finfo(float).tiny


def canonical_metric(metric: str) -> str:
    metric = _METRIC_ALIASES.get(metric, metric)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


@dataclass(frozen=True)
class LearnConfig:
    k_base: int = 2
    k_pool: int = 10
    embed_dim: int = 10
    batch_size: int = 50
    edge_budget_ratio: float = 1.15
    max_iters: int = 50
    # picked on a validation split of MovieLens 100K (see notebooks/02_tuning.py)
    beta: float = 1e-3
    sigma: float = 2.0
    kernel_bandwidth_mode: str = "self-tuning"
    kernel_bandwidth: float = 1.0
    metric: str = "cosine"
    divisor: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.k_base < 1:
            raise ValueError("k_base must be >= 1")
        if self.k_pool < self.k_base:
            raise ValueError("k_pool must be >= k_base")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.edge_budget_ratio >= 1.0:
            raise ValueError("edge_budget_ratio must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.kernel_bandwidth_mode not in ("self-tuning", "fixed"):
            raise ValueError("kernel_bandwidth_mode must be 'self-tuning' or 'fixed'")
        if not self.kernel_bandwidth > 0:
            raise ValueError("kernel_bandwidth must be > 0")
        if self.divisor is not None and not self.divisor > 0:
            raise ValueError("divisor must be > 0")
        object.__setattr__(self, "metric", canonical_metric(self.metric))
        # validates beta / sigma
        self.params

    @property
    def params(self) -> ObjectiveParams:
        return ObjectiveParams(beta=self.beta, sigma=self.sigma)

    def to_dict(self) -> dict:
        return asdict(self)


def _as_features(feat) -> np.ndarray:
    feat = feat.toarray() if sp.issparse(feat) else np.asarray(feat)
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim == 1:
        feat = feat[:, None]
    if feat.ndim != 2 or feat.shape[1] < 1:
        raise ValueError("features must be a 2-D array with at least one column")
    return feat


def _normalized_rows(feat):
    norms = np.linalg.norm(feat, axis=1)
    if np.any(norms == 0):
        raise DegenerateFeatures(
            f"{int(np.sum(norms == 0))} zero-norm rows have no cosine distance"
        )
    return feat / norms[:, None]


def pairwise_distances(feat, metric="euclidean", rows=None) -> np.ndarray:
    """Distances from ``feat[rows]`` to every row of ``feat``."""
    feat = _as_features(feat)
    metric = canonical_metric(metric)
    idx = np.arange(len(feat)) if rows is None else np.asarray(rows)
    if metric == "cosine":
        unit = _normalized_rows(feat)
        d = 1.0 - unit[idx] @ unit.T
    else:
        sq = np.einsum("ij,ij->i", feat, feat)
        d = np.sqrt(np.maximum(sq[idx, None] + sq[None, :] - 2.0 * feat[idx] @ feat.T, 0.0))
    d = np.maximum(d, 0.0)
    d[np.arange(len(idx)), idx] = 0.0
    return d


def nearest_neighbors(feat, k, metric="euclidean", block=512):
    """k nearest distinct rows per row, ties broken by smaller index.

    Returns ``(indices, distances)``, both of shape ``(n, k)``.
    """
    feat = _as_features(feat)
    n = len(feat)
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < number of nodes ({n}), got k={k}")
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        d = pairwise_distances(feat, metric, rows)
        d[np.arange(len(rows)), rows] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[rows] = order
        dist[rows] = np.take_along_axis(d, order, axis=1)
    return idx, dist


def self_tuning_bandwidth(kth_dist) -> float:
    """Mean squared distance to the k-th neighbour (1.0 if that is zero)."""
    s2 = float(np.mean(np.asarray(kth_dist) ** 2))
    return s2 if s2 > 0 else 1.0


def kernel_weights(dist, bandwidth2) -> np.ndarray:
    return np.maximum(np.exp(-np.asarray(dist) ** 2 / bandwidth2), _MIN_WEIGHT)


def _bandwidth(feat, cfg: LearnConfig, knn_dist=None):
    if cfg.kernel_bandwidth_mode == "fixed":
        return cfg.kernel_bandwidth**2
    if knn_dist is None:
        _, knn_dist = nearest_neighbors(feat, cfg.k_base, cfg.metric)
    return self_tuning_bandwidth(knn_dist[:, -1])


def _symmetrize(idx, dist):
    n, k = idx.shape
    src = np.repeat(np.arange(n), k)
    dst = idx.ravel()
    d = dist.ravel()
    i, j = np.minimum(src, dst), np.maximum(src, dst)
    key = i * n + j
    _, first = np.unique(key, return_index=True)
    return i[first], j[first], d[first]


def knn_graph(feat, k, metric="euclidean", bandwidth2=None) -> WeightedGraph:
    """Union-symmetrized kNN graph with Gaussian kernel weights.

    ``bandwidth2`` defaults to the self-tuning value: mean squared distance
    of every node to its k-th neighbour.
    """
    feat = _as_features(feat)
    idx, dist = nearest_neighbors(feat, k, metric)
    if bandwidth2 is None:
        bandwidth2 = self_tuning_bandwidth(dist[:, -1])
    i, j, d = _symmetrize(idx, dist)
    return WeightedGraph(len(feat), i, j, kernel_weights(d, bandwidth2))


def similarity_weights(g: WeightedGraph, feat, floor=1e-12) -> WeightedGraph:
    """Same topology, weights replaced by cosine similarity (floored)."""
    feat = _as_features(feat)
    norms = np.linalg.norm(feat, axis=1)
    dots = np.einsum("ij,ij->i", feat[g.rows], feat[g.cols])
    denom = norms[g.rows] * norms[g.cols]
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(denom > 0, dots / denom, 0.0)
    return g.with_weights(np.maximum(sim, floor))


@dataclass(frozen=True)
class SpectralEmbedding:
    """Node coordinates ``u_i[t] = v_t(i) / sqrt(lambda_t)``.

    Squared coordinate distances sum the contributions of the retained
    eigenpairs to the effective resistance under the precision matrix.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def dist2(self, i, j):
        diff = self.coords[np.asarray(i)] - self.coords[np.asarray(j)]
        return np.sum(diff * diff, axis=-1)


def spectral_embedding(g: WeightedGraph, params: ObjectiveParams, r: int, seed: int = 0,
                       tol: float = 1e-6) -> SpectralEmbedding:
    n = g.node_count
    if not 1 <= r <= n:
        raise ValueError(f"embedding dimension must be in [1, {n}], got {r}")
    theta = precision(g, params.sigma)
    if n <= 256 or r >= n // 2:
        vals, vecs = la.eigh(theta.toarray(), subset_by_index=(0, r - 1))
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            # shift-invert around 0 is safe: theta >= 1/sigma^2 > 0
            vals, vecs = spla.eigsh(theta.tocsc(), k=r, sigma=0.0, which="LM", v0=v0,
                                    maxiter=max(1000, 20 * n))
        except spla.ArpackNoConvergence as exc:
            raise EigensolverNoConvergence(str(exc)) from None
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    resid = np.linalg.norm(theta @ vecs - vecs * vals, axis=0)
    if np.any(resid > tol * np.linalg.norm(vecs, axis=0)) or np.any(vals <= 0):
        raise EigensolverNoConvergence(f"eigen-residual {resid.max():.3e} above {tol}")
    coords = vecs / np.sqrt(vals)
    return SpectralEmbedding(coords, vals, vecs)


@dataclass(frozen=True, order=True)
class CandidateEdge:
    i: int
    j: int
    data_dist2: float
    embed_dist2: float
    gain: float
    distance: float = field(default=0.0)


def candidate_pool(feat, cfg: LearnConfig):
    """Union of every node's ``k_pool`` nearest pairs, as (i, j, distance)."""
    feat = _as_features(feat)
    k = min(cfg.k_pool, len(feat) - 1)
    idx, dist = nearest_neighbors(feat, k, cfg.metric)
    return _symmetrize(idx, dist)


def score_candidates(feat, emb: SpectralEmbedding, g: WeightedGraph, cfg: LearnConfig,
                     pool=None) -> list[CandidateEdge]:
    """Rank candidate pairs by estimated gain of adding a small edge.

    gain = embed_dist2 - data_dist2 / divisor - 4 * beta, i.e. the
    derivative of the objective at zero weight: the log-det term gives the
    effective resistance (estimated from the embedding), the trace term
    gives the squared signal difference, and the l1 term grows by 4w (two
    off-diagonal and two diagonal entries).
    """
    feat = _as_features(feat)
    if pool is None:
        pool = candidate_pool(feat, cfg)
    pi, pj, pd = pool
    existing = g.adjacency()
    fresh = np.asarray(existing[pi, pj]).ravel() == 0 if len(pi) else np.zeros(0, dtype=bool)
    pi, pj, pd = pi[fresh], pj[fresh], pd[fresh]
    divisor = cfg.divisor if cfg.divisor is not None else feat.shape[1]
    diff = feat[pi] - feat[pj]
    data2 = np.einsum("ij,ij->i", diff, diff)
    emb2 = emb.dist2(pi, pj)
    gain = emb2 - data2 / divisor - 4.0 * cfg.beta
    order = np.lexsort((pj, pi, -gain))
    return [
        CandidateEdge(int(pi[t]), int(pj[t]), float(data2[t]), float(emb2[t]), float(gain[t]), float(pd[t]))
        for t in order
    ]


@dataclass
class BatchRecord:
    iteration: int
    size: int
    objective_before: float
    objective_after: float
    accepted: bool


@dataclass
class RefineResult:
    graph: WeightedGraph
    base_objective: float
    objective: float
    batches: list = field(default_factory=list)
    base: Optional[WeightedGraph] = None

    @property
    def accepted(self):
        return [b for b in self.batches if b.accepted]


def edge_budget(base: WeightedGraph, ratio: float) -> int:
    return int(np.floor(ratio * len(base) + 1e-9))


def refine(base: WeightedGraph, feat, cfg: LearnConfig, bandwidth2=None) -> RefineResult:
    """Grow ``base`` by objective-checked batches of high-gain edges."""
    feat = _as_features(feat)
    if feat.shape[0] != base.node_count:
        raise ValueError("feature rows must match graph nodes")
    params = cfg.params
    g = base
    obj = objective(g, feat, params, cfg.divisor)
    result = RefineResult(base, obj, obj, base=base)
    max_edges = edge_budget(base, cfg.edge_budget_ratio)
    if len(g) >= max_edges or cfg.max_iters == 0:
        return result
    if bandwidth2 is None:
        bandwidth2 = _bandwidth(feat, cfg)
    pool = candidate_pool(feat, cfg)
    r = min(cfg.embed_dim, g.node_count)
    batch = cfg.batch_size
    for it in range(cfg.max_iters):
        if batch == 0 or len(g) >= max_edges:
            break
        emb = spectral_embedding(g, params, r, seed=cfg.seed + it)
        positive = [c for c in score_candidates(feat, emb, g, cfg, pool) if c.gain > 0]
        if not positive:
            break
        while batch > 0:
            take = positive[: min(batch, max_edges - len(g))]
            cand = g.with_edges(
                [c.i for c in take], [c.j for c in take],
                kernel_weights([c.distance for c in take], bandwidth2),
            )
            new_obj = objective(cand, feat, params, cfg.divisor)
            ok = new_obj > obj
            result.batches.append(BatchRecord(it, len(take), obj, new_obj, ok))
            if ok:
                log.debug("iter %d: +%d edges, objective %.6f -> %.6f", it, len(take), obj, new_obj)
                g, obj = cand, new_obj
                break
            batch = len(take) // 2
    assert obj >= result.base_objective
    result.graph = g
    result.objective = obj
    return result


def refine_graph(base: WeightedGraph, feat, cfg: LearnConfig) -> WeightedGraph:
    return refine(base, feat, cfg).graph


def base_graph(feat, cfg: LearnConfig) -> WeightedGraph:
    feat = _as_features(feat)
    bw = cfg.kernel_bandwidth**2 if cfg.kernel_bandwidth_mode == "fixed" else None
    return knn_graph(feat, cfg.k_base, cfg.metric, bandwidth2=bw)


def learn_graph(feat, cfg: LearnConfig) -> RefineResult:
    feat = _as_features(feat)
    idx, dist = nearest_neighbors(feat, cfg.k_base, cfg.metric)
    bw = _bandwidth(feat, cfg, dist)
    i, j, d = _symmetrize(idx, dist)
    base = WeightedGraph(len(feat), i, j, kernel_weights(d, bw))
    return refine(base, feat, cfg, bandwidth2=bw)


def learn_user_graph(m, cfg: LearnConfig) -> WeightedGraph:
    """Learned user graph from the zero-filled rows of an interaction matrix."""
    return learn_graph(m.dense(), cfg).graph
