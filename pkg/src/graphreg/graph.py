"""Undirected weighted graphs, edge partitions and node featurizers."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigError, GraphValidationError, InvalidEmbeddingError, ShapeError

EDGE_LL, EDGE_LU, EDGE_UU = 0, 1, 2
EDGE_TYPE_NAMES = ("LL", "LU", "UU")


class Graph:
    """Undirected graph with nonnegative edge weights and no self-loops.

    Edges keep their insertion order; ``edges_u[i] < edges_v[i]`` is *not*
    enforced, but each unordered pair may appear only once.
    """

    def __init__(self, n_nodes, edges=()):
        if int(n_nodes) < 0:
            raise GraphValidationError("n_nodes must be nonnegative")
        self.n_nodes = int(n_nodes)
        self._u, self._v, self._w = [], [], []
        self._pairs = set()
        self._cache = {}
        for e in edges:
            self.add_edge(*e)

    @classmethod
    def from_arrays(cls, n_nodes, u, v, w=None):
        g = cls(n_nodes)
        w = np.ones(len(u)) if w is None else w
        for a, b, c in zip(u, v, w):
            g.add_edge(int(a), int(b), float(c))
        return g

    def add_edge(self, u, v, w=1.0):
        u, v, w = int(u), int(v), float(w)
        if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
            raise GraphValidationError(f"edge ({u}, {v}) references a node outside [0, {self.n_nodes})")
        if u == v:
            raise GraphValidationError(f"self-loop on node {u}")
        if not np.isfinite(w) or w < 0:
            raise GraphValidationError(f"edge ({u}, {v}) has invalid weight {w}")
        key = (u, v) if u < v else (v, u)
        if key in self._pairs:
            raise GraphValidationError(f"duplicate edge ({u}, {v})")
        self._pairs.add(key)
        self._u.append(u)
        self._v.append(v)
        self._w.append(w)
        self._cache.clear()
        return self

    def has_edge(self, u, v):
        return ((u, v) if u < v else (v, u)) in self._pairs

    @property
    def n_edges(self):
        return len(self._u)

    def _cached(self, name, build):
        if name not in self._cache:
            self._cache[name] = build()
        return self._cache[name]

    @property
    def edges_u(self):
        return self._cached("u", lambda: np.asarray(self._u, dtype=np.int64))

    @property
    def edges_v(self):
        return self._cached("v", lambda: np.asarray(self._v, dtype=np.int64))

    @property
    def weights(self):
        return self._cached("w", lambda: np.asarray(self._w, dtype=np.float64))

    @property
    def incident_count(self):
        def build():
            return np.bincount(
                np.concatenate([self.edges_u, self.edges_v]), minlength=self.n_nodes
            ).astype(np.int64)
        return self._cached("deg", build)

    @property
    def adjacency(self):
        """Symmetric weighted adjacency as CSR with sorted column indices."""
        def build():
            u, v, w = self.edges_u, self.edges_v, self.weights
            A = sparse.coo_matrix(
                (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                shape=(self.n_nodes, self.n_nodes),
            ).tocsr()
            A.sort_indices()
            return A
        return self._cached("adj", build)

    def neighbors(self, node):
        A = self.adjacency
        return A.indices[A.indptr[node]:A.indptr[node + 1]]

    def edge_list(self):
        return list(zip(self._u, self._v, self._w))

    def subgraph_without(self, nodes):
        """Same node ids, minus every edge touching ``nodes``."""
        drop = np.zeros(self.n_nodes, dtype=bool)
        drop[np.asarray(list(nodes), dtype=np.int64)] = True
        g = Graph(self.n_nodes)
        for u, v, w in self.edge_list():
            if not (drop[u] or drop[v]):
                g.add_edge(u, v, w)
        return g

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n_nodes == other.n_nodes
            and self.edge_list() == other.edge_list()
        )

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def load_graph(records, n_nodes=None):
    """Build a graph from ``(u, v)`` or ``(u, v, w)`` records.

    ``n_nodes`` defaults to one more than the largest id seen.
    """
    records = [tuple(r) for r in records]
    if n_nodes is None:
        n_nodes = 1 + max((max(int(r[0]), int(r[1])) for r in records), default=-1)
    g = Graph(n_nodes)
    for r in records:
        if len(r) not in (2, 3):
            raise GraphValidationError(f"edge record {r!r} must have 2 or 3 fields")
        g.add_edge(*r)
    return g


@dataclass
class EdgePartition:
    """Edge ids of a graph split by how many endpoints carry a label."""

    ll: np.ndarray
    lu: np.ndarray
    uu: np.ndarray
    edge_type: np.ndarray
    labeled: np.ndarray

    def edges_of(self, kind):
        return (self.ll, self.lu, self.uu)[kind]


def partition_edges(graph, labeled_mask):
    mask = np.asarray(labeled_mask, dtype=bool)
    if mask.shape != (graph.n_nodes,):
        raise ShapeError(f"labeled mask has shape {mask.shape}, expected ({graph.n_nodes},)")
    n_lab = mask[graph.edges_u].astype(np.int64) + mask[graph.edges_v]
    edge_type = np.where(n_lab == 2, EDGE_LL, np.where(n_lab == 1, EDGE_LU, EDGE_UU))
    return EdgePartition(
        ll=np.flatnonzero(edge_type == EDGE_LL),
        lu=np.flatnonzero(edge_type == EDGE_LU),
        uu=np.flatnonzero(edge_type == EDGE_UU),
        edge_type=edge_type.astype(np.int64),
        labeled=mask.copy(),
    )


def adjacency_features(graph):
    """Binary adjacency rows including the node itself, as a CSR matrix.

    Row ``i`` has ones at ``i`` and at every neighbour of ``i``.
    """
    A = graph.adjacency.copy()
    A.data[:] = 1.0
    F = (A + sparse.identity(graph.n_nodes, format="csr")).tocsr()
    F.sort_indices()
    return F


def knn_graph(embeddings, k, threshold=0.0):
    """Symmetric cosine k-nearest-neighbour graph.

    Each node proposes its ``k`` most similar other nodes whose similarity is
    strictly above ``threshold`` (ties go to the lower node id); an edge exists
    if either endpoint proposed it, so merged degrees can exceed ``k``.  Edge
    weight is the cosine similarity clamped to ``[0, 1]``.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("embeddings must be a 2-D array")
    if int(k) < 1:
        raise ConfigError("k must be >= 1")
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        bad = np.flatnonzero((norms == 0) | ~np.isfinite(norms))
        raise InvalidEmbeddingError(f"zero-norm or non-finite embedding rows: {bad[:10].tolist()}")
    Z = X / norms[:, None]
    S = Z @ Z.T
    S = 0.5 * (S + S.T)
    proposals = set()
    ids = np.arange(n)
    for i in range(n):
        s = S[i].copy()
        s[i] = -np.inf
        # lexsort: last key is primary -> descending similarity, then ascending id
        order = np.lexsort((ids, -s))
        taken = 0
        for j in order:
            if taken == k or not s[j] > threshold:
                break
            proposals.add((i, int(j)) if i < j else (int(j), i))
            taken += 1
    g = Graph(n)
    for u, v in sorted(proposals):
        g.add_edge(u, v, float(min(max(S[u, v], 0.0), 1.0)))
    return g


def sbm_generate(blocks, nodes_per_block, p_in, p_out, feature_noise=0.1, seed=0):
    """Stochastic block model graph with noisy one-hot block features.

    Node ``i`` belongs to block ``i // nodes_per_block``.  Each unordered pair
    is joined with probability ``p_in`` inside a block and ``p_out`` across
    blocks.  Features are the one-hot block indicator plus Gaussian noise with
    standard deviation ``feature_noise``.
    """
    if blocks < 1 or nodes_per_block < 1:
        raise ConfigError("blocks and nodes_per_block must be >= 1")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ConfigError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_noise < 0:
        raise ConfigError("feature_noise must be nonnegative")
    rng = np.random.default_rng(seed)
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)
    iu, iv = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[iv], p_in, p_out)
    keep = rng.random(len(iu)) < p
    g = Graph(n)
    for u, v in zip(iu[keep], iv[keep]):
        g.add_edge(int(u), int(v), 1.0)
    features = np.eye(blocks)[labels] + feature_noise * rng.standard_normal((n, blocks))
    return g, features, labels
