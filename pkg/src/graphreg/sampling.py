"""Edge and node minibatch samplers."""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConfigError

SAMPLER_MODES = ("uniform", "neighborhood")


@dataclass
class EdgeBatch:
    edge_ids: np.ndarray
    edge_types: np.ndarray

    def __len__(self):
        return len(self.edge_ids)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_edge_batches(graph, partition, batch_size, mode="uniform", seed=0, drop_uu=False):
    """Yield one epoch of edge minibatches.

    ``uniform`` splits a seeded shuffle of the edges into consecutive chunks.
    ``neighborhood`` reorders that shuffle so each batch grows outward from a
    seed edge through edges sharing endpoints with the batch.  Either way every
    eligible edge appears exactly once.  ``drop_uu`` removes unlabeled-unlabeled
    edges from the epoch.
    """
    if int(batch_size) < 1:
        raise ConfigError("batch_size must be >= 1")
    if mode not in SAMPLER_MODES:
        raise ConfigError(f"unknown sampler mode {mode!r}")
    rng = _rng(seed)
    eligible = np.arange(graph.n_edges)
    if drop_uu:
        eligible = np.flatnonzero(partition.edge_type != 2)
    if len(eligible) == 0:
        return
    perm = eligible[rng.permutation(len(eligible))]
    if mode == "uniform":
        bounds = range(0, len(perm), batch_size)
        chunks = [perm[s:s + batch_size] for s in bounds]
    else:
        # renumber to a dense 0..m-1 range so the kernel can index flat arrays
        eu = graph.edges_u[eligible]
        ev = graph.edges_v[eligible]
        local = np.empty(graph.n_edges, dtype=np.int64)
        local[eligible] = np.arange(len(eligible))
        order, bnd = _backend.neighborhood_order(graph.n_nodes, eu, ev, local[perm], batch_size)
        order = eligible[order]
        chunks = [order[bnd[i]:bnd[i + 1]] for i in range(len(bnd) - 1)]
    for ids in chunks:
        yield EdgeBatch(ids, partition.edge_type[ids])


def class_balanced_sampler(labels, batch_size, seed=0, n_batches=None, nodes=None, n_classes=None):
    """Yield node minibatches whose class histogram is as even as possible.

    Each batch gives ``batch_size // C`` slots to every present class and one
    extra slot to ``batch_size % C`` classes chosen round-robin, so no class
    count is more than one away from ``batch_size / C``.  Within a class, nodes
    are drawn from a reshuffled cycle, which repeats minority-class nodes when
    needed.  Runs forever unless ``n_batches`` is given.
    """
    if int(batch_size) < 1:
        raise ConfigError("batch_size must be >= 1")
    labels = np.asarray(labels, dtype=np.int64)
    nodes = np.arange(len(labels)) if nodes is None else np.asarray(nodes, dtype=np.int64)
    rng = _rng(seed)
    present = np.unique(labels)
    if n_classes is not None:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        if missing:
            warnings.warn(f"classes {missing} have no instances and are excluded from balancing")
    if len(present) == 0:
        return
    pools = [nodes[labels == c] for c in present]
    queues = [rng.permutation(p) for p in pools]
    cursors = [0] * len(pools)
    C = len(present)
    base, extra = divmod(int(batch_size), C)
    offset = int(rng.integers(C))

    def draw(ci, count):
        out = []
        while count > 0:
            if cursors[ci] == len(queues[ci]):
                queues[ci] = rng.permutation(pools[ci])
                cursors[ci] = 0
            take = min(count, len(queues[ci]) - cursors[ci])
            out.append(queues[ci][cursors[ci]:cursors[ci] + take])
            cursors[ci] += take
            count -= take
        return out

    produced = 0
    while n_batches is None or produced < n_batches:
        bonus = {(offset + j) % C for j in range(extra)}
        offset = (offset + extra) % C
        parts = []
        for ci in range(C):
            parts.extend(draw(ci, base + (ci in bonus)))
        batch = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        yield batch[rng.permutation(len(batch))]
        produced += 1
