"""Graph-regularized training of feed-forward networks.

The objective is the supervised cost over labeled nodes plus, for every edge,
``alpha_t * w_uv * d(h(x_u), h(x_v))`` with ``alpha_t`` chosen by the edge's
type (labeled-labeled, labeled-unlabeled, unlabeled-unlabeled).  Training
rewrites it as a sum over edges, with each labeled node's supervised cost
split evenly across its incident edges, so that minibatches of edges give
stochastic gradients.  Labeled nodes with no incident edges have no edge to
carry their cost; they are trained through a separate class-balanced node
stream and are added back explicitly when evaluating the edge-wise objective.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from . import _backend, nn
from .errors import ConfigError, DataError, NumericFault, ShapeError
from .graph import EDGE_LL, EDGE_LU, EDGE_UU, partition_edges
from .sampling import SAMPLER_MODES, class_balanced_sampler, sample_edge_batches


@dataclass
class NGMConfig:
    hidden: tuple = (50,)
    activation: str = "relu"
    alpha: tuple = (0.1, 0.1, 0.1)
    metric: str = "squared-l2"
    symmetric_ce: bool = False
    h_layer: object = "last_hidden"
    loss: str = None
    lr: float = 0.1
    momentum: float = 0.0
    batch_size: int = 32
    epochs: int = 50
    sampler: str = "uniform"
    drop_uu: bool = False
    node_batch_size: int = 16
    node_batches_per_edge_batch: int = 1
    n_labels: int = None
    seed: int = 0
    record_objective: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.alpha = tuple(float(a) for a in self.alpha)
        if len(self.alpha) != 3 or any(not math.isfinite(a) or a < 0 for a in self.alpha):
            raise ConfigError(f"alpha must be three finite nonnegative values, got {self.alpha}")
        if self.metric not in nn.METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.activation not in nn.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.loss is not None and self.loss not in nn.LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.sampler not in SAMPLER_MODES:
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.batch_size < 1 or self.node_batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch sizes must be >= 1 and epochs >= 0")
        if self.node_batches_per_edge_batch < 1:
            raise ConfigError("node_batches_per_edge_batch must be >= 1")
        if not self.lr > 0 or not 0 <= self.momentum < 1:
            raise ConfigError("need lr > 0 and 0 <= momentum < 1")
        if self.metric == "cross-entropy" and self.h_layer != "output":
            raise ConfigError("the cross-entropy distance needs h_layer='output'")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["alpha"] = list(self.alpha)
        return d


@dataclass
class TrainHistory:
    params: nn.ModelParams
    epochs: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    rounds: list = field(default_factory=list)
    final_labels: np.ndarray = None
    final_mask: np.ndarray = None

    def to_dict(self):
        return {
            "config": self.config,
            "metadata": self.metadata,
            "epochs": self.epochs,
            "rounds": self.rounds,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _is_multilabel(labels):
    return np.asarray(labels).ndim == 2


def _loss_kind(config, labels):
    if config.loss is not None:
        return config.loss
    return "sigmoid-cross-entropy" if _is_multilabel(labels) else "softmax-cross-entropy"


def _n_labels(config, labels, mask, extra=None):
    if config.n_labels is not None:
        return int(config.n_labels)
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.shape[1]
    seen = [labels[mask]]
    if extra is not None:
        seen.append(np.asarray(extra).reshape(-1))
    seen = np.concatenate(seen)
    return int(seen.max()) + 1 if seen.size else 1


def _targets(labels, nodes, kind, L):
    """Loss targets for ``nodes`` in the form ``kind`` expects."""
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels[nodes].astype(np.float64)
    y = labels[nodes].astype(np.int64)
    if kind == "softmax-cross-entropy":
        return y
    return np.eye(L)[y]


def _primary_class(labels):
    labels = np.asarray(labels)
    return labels.argmax(axis=1) if labels.ndim == 2 else labels


def _validate(graph, features, labels, mask):
    if features.shape[0] != graph.n_nodes:
        raise DataError(f"features have {features.shape[0]} rows for {graph.n_nodes} nodes")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (graph.n_nodes,):
        raise ShapeError("labeled mask must have one entry per node")
    labels = np.asarray(labels)
    if labels.shape[0] != graph.n_nodes:
        raise DataError("labels must have one row per node (unlabeled rows are ignored)")
    if sparse.issparse(features):
        finite = np.all(np.isfinite(features.data))
    else:
        finite = np.all(np.isfinite(features))
    if not finite:
        raise DataError("features contain non-finite values")
    return mask


def _hidden_and_logits(params, features, config):
    trace = nn.forward(params, features, config.h_layer)
    return trace.hidden_matrix, trace.logits_matrix


def objective_terms(params, graph, partition, features, labels, config):
    """Supervised cost and unweighted per-type regularizers ``sum w * d``."""
    mask = partition.labeled
    kind = _loss_kind(config, labels)
    L = params.n_outputs
    lab = np.flatnonzero(mask)
    sup = nn.supervised_cost(params, features[lab], _targets(labels, lab, kind, L), kind)
    H, _ = _hidden_and_logits(params, features, config)
    regs = []
    for ids in (partition.ll, partition.lu, partition.uu):
        if len(ids) == 0:
            regs.append(0.0)
            continue
        d = nn.pairwise_distances(
            H, graph.edges_u[ids], graph.edges_v[ids], config.metric, config.symmetric_ce
        )
        regs.append(float(np.dot(graph.weights[ids], d)))
    return sup, regs


def full_objective(params, graph, partition, features, labels, config):
    """Supervised cost plus alpha-weighted edge regularizers over the whole graph."""
    sup, regs = objective_terms(params, graph, partition, features, labels, config)
    a1, a2, a3 = config.alpha
    return sup + a1 * regs[0] + a2 * regs[1] + a3 * regs[2]


def edge_decomposed_objective(params, graph, partition, features, labels, config, batches=None):
    """The same objective written as a sum of per-edge terms.

    Each edge carries its alpha-weighted distance plus ``c_n / |n|`` for every
    labeled endpoint ``n``; labeled nodes without edges contribute their full
    cost separately.  Edges are summed in the order given by ``batches``
    (default: edge id order), skipping unlabeled-unlabeled edges when
    ``config.drop_uu`` is set.
    """
    mask = partition.labeled
    deg = graph.incident_count
    kind = _loss_kind(config, labels)
    L = params.n_outputs
    lab = np.flatnonzero(mask)
    H, G = _hidden_and_logits(params, features, config)
    node_cost = np.zeros(graph.n_nodes)
    if len(lab):
        vals, _ = nn.supervised_losses(G[lab], _targets(labels, lab, kind, L), kind)
        node_cost[lab] = vals
    if batches is None:
        order = np.arange(graph.n_edges)
        if config.drop_uu:
            order = order[partition.edge_type[order] != EDGE_UU]
        batches = [order]
    else:
        batches = [getattr(b, "edge_ids", b) for b in batches]

    alpha = np.asarray(config.alpha)
    total = 0.0
    for ids in batches:
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) == 0:
            continue
        u, v = graph.edges_u[ids], graph.edges_v[ids]
        t = partition.edge_type[ids]
        d = nn.pairwise_distances(H, u, v, config.metric, config.symmetric_ce)
        terms = alpha[t] * graph.weights[ids] * d
        with np.errstate(divide="ignore", invalid="ignore"):
            cu = np.where(mask[u], node_cost[u] / deg[u], 0.0)
            cv = np.where(mask[v], node_cost[v] / deg[v], 0.0)
        terms = terms + cu + cv
        total += float(np.sum(terms))
    isolated = lab[deg[lab] == 0]
    return total + float(np.sum(node_cost[isolated]))


def batch_loss_spec(graph, partition, labels, batch, node_batch, node_weight, kind, L, config, scale):
    """Assemble the loss of one training step over the nodes it touches.

    Returns ``(nodes, spec)``: the node ids whose features must be fed
    forward, and a :class:`nn.LossSpec` indexing rows of that node list.
    """
    mask = partition.labeled
    deg = graph.incident_count
    ids = batch.edge_ids if batch is not None else np.zeros(0, dtype=np.int64)
    u, v = graph.edges_u[ids], graph.edges_v[ids]
    node_batch = np.zeros(0, dtype=np.int64) if node_batch is None else np.asarray(node_batch)
    nodes, inv = np.unique(np.concatenate([u, v, node_batch]), return_inverse=True)
    lu_, lv_ = inv[:len(ids)], inv[len(ids):2 * len(ids)]
    ln_ = inv[2 * len(ids):]

    sup_nodes, sup_rows, sup_w = [], [], []
    for ends, local in ((u, lu_), (v, lv_)):
        keep = mask[ends]
        sup_nodes.append(ends[keep])
        sup_rows.append(local[keep])
        sup_w.append(1.0 / deg[ends[keep]])
    sup_nodes.append(node_batch)
    sup_rows.append(ln_)
    sup_w.append(np.full(len(node_batch), float(node_weight)))
    sup_nodes = np.concatenate(sup_nodes).astype(np.int64)

    alpha = np.asarray(config.alpha)
    spec = nn.LossSpec(
        sup_rows=np.concatenate(sup_rows).astype(np.int64),
        sup_targets=_targets(labels, sup_nodes, kind, L),
        sup_weights=scale * np.concatenate(sup_w),
        dist_a=lu_.astype(np.int64),
        dist_b=lv_.astype(np.int64),
        dist_weights=scale * alpha[batch.edge_types] * graph.weights[ids] if len(ids) else np.zeros(0),
        kind=kind,
        metric=config.metric,
        symmetric=config.symmetric_ce,
    )
    return nodes, spec


@dataclass
class TrainingStep:
    epoch: int
    edge_batch: object
    node_batch: np.ndarray
    node_weight: float


def training_schedule(graph, partition, labels, config):
    """Yield every SGD step of a run: its edge batch and supervised node batch.

    The schedule depends only on the graph, labeled set and seed, never on
    parameter values, so supervised-only reference loops can replay it.
    """
    rng = np.random.default_rng([config.seed, 1])
    deg = graph.incident_count
    iso = np.flatnonzero(partition.labeled & (deg == 0))
    node_stream = None
    if len(iso):
        node_stream = class_balanced_sampler(
            _primary_class(labels)[iso], config.node_batch_size, seed=rng, nodes=iso
        )
    r = config.node_batches_per_edge_batch
    for epoch in range(config.epochs):
        edge_batches = list(
            sample_edge_batches(graph, partition, config.batch_size, config.sampler, rng, config.drop_uu)
        )
        if node_stream is None:
            for b in edge_batches:
                yield TrainingStep(epoch, b, None, 0.0)
            continue
        n_node_batches = len(edge_batches) * r or math.ceil(len(iso) / config.node_batch_size)
        weight = len(iso) / (n_node_batches * config.node_batch_size)
        if edge_batches:
            for b in edge_batches:
                nb = np.concatenate([next(node_stream) for _ in range(r)])
                yield TrainingStep(epoch, b, nb, weight)
        else:
            for _ in range(n_node_batches):
                yield TrainingStep(epoch, None, next(node_stream), weight)


def train(graph, features, labels, labeled_mask, config=None, eval_nodes=None, eval_labels=None):
    """Train a network with the graph-regularized objective by edge-minibatch SGD.

    ``labels`` has one row per node (class ids, or a 0/1 matrix for
    multi-label); only rows where ``labeled_mask`` is set are read.  Each step
    loss is divided by ``config.batch_size``.  Returns a :class:`TrainHistory`
    with per-epoch objective values and, if ``eval_nodes`` is given, accuracy.
    """
    config = config or NGMConfig()
    mask = _validate(graph, features, labels, labeled_mask)
    kind = _loss_kind(config, labels)
    L = _n_labels(config, labels, mask, None if _is_multilabel(labels) else eval_labels)
    dims = [features.shape[1], *config.hidden, L]
    params = nn.init_params(dims, config.activation, seed=config.seed)
    partition = partition_edges(graph, mask)
    scale = 1.0 / config.batch_size

    history = TrainHistory(
        params=params,
        config=config.to_dict(),
        metadata={
            "layer_dims": dims,
            "loss": kind,
            "n_labels": L,
            "n_labeled": int(mask.sum()),
            "edge_counts": {"LL": len(partition.ll), "LU": len(partition.lu), "UU": len(partition.uu)},
            "step_loss_scaling": "sum of batch terms divided by batch_size",
            "kernel_backend": _backend.BACKEND,
        },
    )
    velocity = None
    epoch_losses = []
    n_steps = 0
    current_epoch = 0

    def close_epoch(epoch):
        rec = {"epoch": epoch, "mean_step_loss": float(np.mean(epoch_losses)) if epoch_losses else 0.0,
               "steps": len(epoch_losses)}
        if config.record_objective:
            sup, regs = objective_terms(params, graph, partition, features, labels, config)
            a1, a2, a3 = config.alpha
            rec.update(objective=sup + a1 * regs[0] + a2 * regs[1] + a3 * regs[2], supervised=sup,
                       reg_ll=regs[0], reg_lu=regs[1], reg_uu=regs[2])
        if eval_nodes is not None:
            pred, _ = predict(params, features[eval_nodes])
            rec["eval_accuracy"] = float(np.mean(np.all(
                np.asarray(pred).reshape(len(eval_nodes), -1)
                == np.asarray(eval_labels).reshape(len(eval_nodes), -1), axis=1)))
        history.epochs.append(rec)
        epoch_losses.clear()

    for step in training_schedule(graph, partition, labels, config):
        while step.epoch > current_epoch:
            close_epoch(current_epoch)
            current_epoch += 1
        nodes, spec = batch_loss_spec(
            graph, partition, labels, step.edge_batch, step.node_batch, step.node_weight,
            kind, L, config, scale,
        )
        value, grad = nn.loss_and_grad(params, features[nodes], spec, config.h_layer)
        if not math.isfinite(value):
            raise NumericFault(
                f"non-finite loss at epoch {step.epoch}, step {n_steps}",
                {"epoch": step.epoch, "step": n_steps,
                 "edge_ids": [] if step.edge_batch is None else step.edge_batch.edge_ids.tolist()},
            )
        try:
            params, velocity = nn.sgd_step(params, grad, config.lr, config.momentum, velocity)
        except NumericFault as exc:
            exc.diagnostics.update(epoch=step.epoch, step=n_steps)
            raise
        epoch_losses.append(value)
        n_steps += 1
    while current_epoch < config.epochs:
        close_epoch(current_epoch)
        current_epoch += 1
    history.params = params
    history.metadata["n_steps"] = n_steps
    return history


def predict(params, features):
    """Class probabilities and hard labels from one forward pass per node.

    Softmax outputs give argmax labels (ties to the lowest index); a network
    trained with one-vs-rest sigmoid heads should use :func:`predict_multilabel`.
    """
    G = nn.forward(params, features, "output").logits_matrix
    z = G - G.max(axis=1, keepdims=True)
    P = np.exp(z)
    P /= P.sum(axis=1, keepdims=True)
    return np.argmax(P, axis=1), P


def predict_multilabel(params, features, threshold=0.5):
    G = nn.forward(params, features, "output").logits_matrix
    P = 0.5 * (1.0 + np.tanh(0.5 * G))
    return (P >= threshold).astype(np.int64), P


def _predict_for(history, features):
    if history.metadata.get("loss") == "sigmoid-cross-entropy":
        return predict_multilabel(history.params, features)
    return predict(history.params, features)


def self_train(graph, features, labels, labeled_mask, config=None, rounds=3,
               eval_nodes=None, eval_labels=None):
    """Retrain while growing the labeled set through graph neighbours.

    After each round every unlabeled node adjacent to a labeled node takes the
    model's predicted label and joins the labeled set.  Original labels are
    never overwritten.  Stops early once no unlabeled neighbour remains.
    """
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    config = config or NGMConfig()
    mask = np.array(labeled_mask, dtype=bool)
    cur = np.array(labels, copy=True)
    if config.n_labels is None and not _is_multilabel(labels):
        # fix the output width up front so every round builds the same network
        L = _n_labels(config, labels, mask, eval_labels)
        config = NGMConfig(**{**config.to_dict(), "n_labels": L})
    # neighbourhood by sparsity pattern, so zero-weight edges still count
    A = graph.adjacency.copy()
    A.data[:] = 1.0
    summary = []
    hist = None
    for r in range(rounds):
        hist = train(graph, features, cur, mask, config, eval_nodes, eval_labels)
        entry = {"round": r, "n_labeled": int(mask.sum())}
        if hist.epochs and "eval_accuracy" in hist.epochs[-1]:
            entry["eval_accuracy"] = hist.epochs[-1]["eval_accuracy"]
        frontier = np.flatnonzero(~mask & (A @ mask.astype(np.float64) > 0))
        entry["n_added"] = 0
        summary.append(entry)
        if r == rounds - 1 or len(frontier) == 0:
            entry["closed"] = len(frontier) == 0
            break
        pred, _ = _predict_for(hist, features[frontier])
        cur[frontier] = pred
        mask[frontier] = True
        entry["n_added"] = int(len(frontier))
    hist.rounds = summary
    hist.final_labels = cur
    hist.final_mask = mask
    return hist
