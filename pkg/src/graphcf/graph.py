"""Weighted undirected graphs, Laplacian / precision operators and the
log-det graph-learning objective.

The precision matrix of a graph is ``Theta = L + I / sigma**2``. Everything
that needs ``log det Theta`` or solves with ``Theta`` goes through
:func:`factorize`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, InvalidGraph, NotPositiveDefinite

DENSE_CUTOFF = 64


@dataclass(frozen=True)
class ObjectiveParams:
    beta: float = 1e-3
    sigma: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    @property
    def shift(self) -> float:
        """Diagonal shift 1/sigma^2."""
        return 1.0 / self.sigma**2


class WeightedGraph:
    """Undirected, self-loop free graph with strictly positive weights.

    Edges are stored once with ``i < j``, sorted lexicographically.
    Instances are immutable; use :meth:`with_edges` to derive a new graph.
    """

    __slots__ = ("node_count", "rows", "cols", "weights", "_adj")

    def __init__(self, node_count, rows=(), cols=(), weights=()):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        weights = np.asarray(weights, dtype=np.float64).ravel()
        node_count = int(node_count)
        if node_count < 0:
            raise InvalidGraph("node_count must be non-negative")
        if not (len(rows) == len(cols) == len(weights)):
            raise InvalidGraph("edge arrays differ in length")
        if np.any(rows == cols):
            raise InvalidGraph("self-loops are not allowed")
        if len(rows) and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= node_count):
            raise InvalidGraph("edge endpoint out of range")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise InvalidGraph("edge weights must be finite and strictly positive")
        i = np.minimum(rows, cols)
        j = np.maximum(rows, cols)
        order = np.lexsort((j, i))
        i, j, weights = i[order], j[order], weights[order]
        if len(i) > 1 and np.any((i[1:] == i[:-1]) & (j[1:] == j[:-1])):
            raise InvalidGraph("duplicate edge")
        for a in (i, j, weights):
            a.setflags(write=False)
        object.__setattr__(self, "node_count", node_count)
        object.__setattr__(self, "rows", i)
        object.__setattr__(self, "cols", j)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_adj", None)

    def __setattr__(self, name, value):
        raise AttributeError("WeightedGraph is immutable")

    @classmethod
    def from_edges(cls, node_count, edges):
        """Build from an iterable of ``(i, j, w)`` triples."""
        edges = list(edges)
        if not edges:
            return cls(node_count)
        i, j, w = zip(*edges)
        return cls(node_count, i, j, w)

    @classmethod
    def from_adjacency(cls, adj):
        """Build from a symmetric (sparse or dense) weighted adjacency."""
        upper = sp.triu(sp.csr_matrix(adj), k=1).tocoo()
        keep = upper.data != 0
        return cls(adj.shape[0], upper.row[keep], upper.col[keep], upper.data[keep])

    @property
    def edges(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))

    def edge_set(self):
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def has_edge(self, i, j) -> bool:
        a, b = (i, j) if i < j else (j, i)
        return self.adjacency()[a, b] != 0

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency W (cached)."""
        if self._adj is None:
            n = self.node_count
            w = sp.coo_matrix(
                (np.concatenate([self.weights, self.weights]),
                 (np.concatenate([self.rows, self.cols]), np.concatenate([self.cols, self.rows]))),
                shape=(n, n),
            ).tocsr()
            w.sort_indices()
            object.__setattr__(self, "_adj", w)
        return self._adj

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def neighbors(self, node):
        """(neighbor indices, edge weights) of ``node``, ascending by index."""
        adj = self.adjacency()
        lo, hi = adj.indptr[node], adj.indptr[node + 1]
        return adj.indices[lo:hi], adj.data[lo:hi]

    def with_edges(self, rows, cols, weights) -> "WeightedGraph":
        """New graph with extra edges appended (must not already exist)."""
        return WeightedGraph(
            self.node_count,
            np.concatenate([self.rows, np.asarray(rows, dtype=np.int64)]),
            np.concatenate([self.cols, np.asarray(cols, dtype=np.int64)]),
            np.concatenate([self.weights, np.asarray(weights, dtype=np.float64)]),
        )

    def with_weights(self, weights) -> "WeightedGraph":
        return WeightedGraph(self.node_count, self.rows, self.cols, weights)

    def __len__(self):
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.node_count, self.rows.tobytes(), self.cols.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"WeightedGraph(node_count={self.node_count}, edges={len(self)})"


def edge_count(g: WeightedGraph) -> int:
    return len(g.weights)


def laplacian(g: WeightedGraph) -> sp.csr_matrix:
    """Combinatorial Laplacian L = D - W as a sparse matrix."""
    w = g.adjacency()
    return (sp.diags(g.degrees()) - w).tocsr()


def precision(g: WeightedGraph, sigma: float) -> sp.csr_matrix:
    """Theta = L + I / sigma^2."""
    if not sigma > 0:
        raise NotPositiveDefinite(f"sigma must be positive, got {sigma}")
    return (laplacian(g) + sp.identity(g.node_count, format="csr") / sigma**2).tocsr()


class Factorization:
    """Cholesky-type factorization of a symmetric positive definite matrix.

    Dense Cholesky below ``DENSE_CUTOFF`` rows. Larger matrices use SuperLU
    with a symmetric fill-reducing ordering and no pivoting (diagonal
    pivots only), which for an SPD matrix is an LDL^T in disguise: every
    pivot must come out positive.
    """

    def __init__(self, a):
        n = a.shape[0]
        self.n = n
        self._dense = None
        self._lu = None
        if n == 0:
            self.logdet = 0.0
            return
        if n < DENSE_CUTOFF:
            dense = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
            try:
                self._dense = la.cho_factor(dense, lower=True, check_finite=True)
            except la.LinAlgError as exc:
                raise NotPositiveDefinite(str(exc)) from None
            self.logdet = 2.0 * float(np.log(np.diag(self._dense[0])).sum())
            return
        a = sp.csc_matrix(a)
        try:
            lu = spla.splu(
                a, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotPositiveDefinite(str(exc)) from None
        pivots = lu.U.diagonal()
        if not np.all(pivots > 0) or not np.all(np.isfinite(pivots)):
            raise NotPositiveDefinite("non-positive pivot in symmetric factorization")
        self._lu = lu
        self.logdet = float(np.log(pivots).sum())

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self._dense is not None:
            return la.cho_solve(self._dense, b)
        if self._lu is not None:
            return self._lu.solve(b)
        return b.copy()


def factorize(g: WeightedGraph, sigma: float) -> Factorization:
    return Factorization(precision(g, sigma))


def log_det_precision(g: WeightedGraph, sigma: float) -> float:
    return factorize(g, sigma).logdet


def _check_signals(x, g):
    x = np.asarray(x.toarray() if sp.issparse(x) else x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != g.node_count:
        raise DimensionMismatch(
            f"signal matrix has {x.shape[0] if x.ndim else 0} rows, graph has {g.node_count} nodes"
        )
    return x


def smoothness(x, g: WeightedGraph) -> float:
    """Tr(X^T L X) for node-per-row signals X.

    Evaluated edge-wise as sum_ij w_ij * ||x_i - x_j||^2, which is the same
    quantity and never goes negative through cancellation.
    """
    x = _check_signals(x, g)
    if len(g) == 0:
        return 0.0
    diff = x[g.rows] - x[g.cols]
    return float(np.dot(g.weights, np.einsum("ij,ij->i", diff, diff)))


def objective(g: WeightedGraph, x, params: ObjectiveParams, divisor=None) -> float:
    """log det(Theta) - Tr(X X^T Theta) / divisor - beta * ||Theta||_1.

    ``divisor`` defaults to the number of signal columns of ``x``. The l1
    norm is entry-wise over all of Theta, diagonal included.
    """
    x = _check_signals(x, g)
    if divisor is None:
        divisor = x.shape[1]
    if not divisor > 0:
        raise ValueError("divisor must be positive")
    shift = params.shift
    fac = factorize(g, params.sigma)
    # Tr(X X^T Theta) = Tr(X^T L X) + shift * ||X||_F^2
    trace = smoothness(x, g) + shift * float(np.sum(x * x))
    # |Theta|_1: off-diagonals contribute 2 * sum(w), diagonal sum(deg + shift)
    l1 = 4.0 * float(g.weights.sum()) + shift * g.node_count
    return fac.logdet - trace / divisor - params.beta * l1


def effective_resistance(g: WeightedGraph, params: ObjectiveParams, i: int, j: int, fac=None) -> float:
    """(e_i - e_j)^T Theta^{-1} (e_i - e_j), the derivative of log det Theta
    with respect to the weight of edge (i, j)."""
    n = g.node_count
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node index out of range for graph with {n} nodes")
    if i == j:
        return 0.0
    if fac is None:
        fac = factorize(g, params.sigma)
    b = np.zeros(n)
    b[i], b[j] = 1.0, -1.0
    z = fac.solve(b)
    return float(z[i] - z[j])


def effective_resistances(g: WeightedGraph, params: ObjectiveParams, pairs, fac=None) -> np.ndarray:
    """Vectorized :func:`effective_resistance` over ``(i, j)`` pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if fac is None:
        fac = factorize(g, params.sigma)
    n = g.node_count
    out = np.zeros(len(pairs))
    block = 256
    for start in range(0, len(pairs), block):
        p = pairs[start:start + block]
        b = np.zeros((n, len(p)))
        cols = np.arange(len(p))
        b[p[:, 0], cols] += 1.0
        b[p[:, 1], cols] -= 1.0
        z = fac.solve(b)
        out[start:start + block] = z[p[:, 0], cols] - z[p[:, 1], cols]
    return out


def save_graph(g: WeightedGraph, path) -> None:
    Path(path).write_text(format_graph(g))


def format_graph(g: WeightedGraph) -> str:
    lines = [f"nodes {g.node_count} edges {len(g)}"]
    lines += [f"{i} {j} {w!r}" for i, j, w in g.edges]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> WeightedGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidGraph("empty graph file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "nodes" or head[2] != "edges":
        raise InvalidGraph(f"bad header: {lines[0]!r}")
    n, m = int(head[1]), int(head[3])
    body = lines[1:]
    if len(body) != m:
        raise InvalidGraph(f"header declares {m} edges, found {len(body)}")
    edges = []
    for ln in body:
        parts = ln.split()
        if len(parts) != 3:
            raise InvalidGraph(f"bad edge line: {ln!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return WeightedGraph.from_edges(n, edges)


def load_graph(path) -> WeightedGraph:
    return parse_graph(Path(path).read_text())
