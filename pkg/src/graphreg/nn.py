"""Dense feed-forward networks with hand-written backpropagation.

Parameters live in one flat float64 vector so that SGD updates and
finite-difference checks treat the whole network as a single point in
parameter space; per-layer weight matrices and biases are views into it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import _backend
from .errors import ConfigError, LabelError, NumericFault, ShapeError

ACTIVATIONS = ("relu", "tanh")
LOSS_KINDS = ("softmax-cross-entropy", "squared-l2", "sigmoid-cross-entropy")
METRICS = ("l1", "squared-l2", "cross-entropy")


@dataclass
class ModelParams:
    layer_dims: tuple
    activation: str
    flat: np.ndarray

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (param_count(self.layer_dims),):
            raise ShapeError(
                f"flat parameter vector has shape {self.flat.shape}, "
                f"expected ({param_count(self.layer_dims)},)"
            )

    @property
    def n_layers(self):
        return len(self.layer_dims) - 1

    @property
    def n_outputs(self):
        return self.layer_dims[-1]

    @property
    def layers(self):
        """List of ``(W, b)`` views, ``W`` shaped ``(out, in)``."""
        out = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            W = self.flat[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = self.flat[offset:offset + fan_out]
            offset += fan_out
            out.append((W, b))
        return out

    def copy(self):
        return ModelParams(self.layer_dims, self.activation, self.flat.copy())

    def with_flat(self, flat):
        return ModelParams(self.layer_dims, self.activation, flat)


def param_count(layer_dims):
    return sum(i * o + o for i, o in zip(layer_dims[:-1], layer_dims[1:]))


def init_params(layer_dims, activation="relu", seed=0):
    """Glorot-uniform weights, zero biases.

    Layer ``k`` draws from ``U[-s, s]`` with ``s = sqrt(6 / (fan_in + fan_out))``.
    """
    layer_dims = list(layer_dims)
    if len(layer_dims) < 2:
        raise ConfigError("need at least an input and an output dimension")
    if any(int(d) < 1 for d in layer_dims):
        raise ConfigError(f"layer dimensions must be >= 1, got {layer_dims}")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-s, s, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return ModelParams(tuple(layer_dims), activation, np.concatenate(chunks))


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z, a, kind):
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def resolve_h_layer(params, h_layer):
    """Map a layer selector to an activation index in ``1..n_layers``.

    ``"last_hidden"`` is the final hidden layer, ``"output"`` the logits, and an
    integer ``k`` the activation after the k-th affine layer.
    """
    n = params.n_layers
    if h_layer == "output":
        return n
    if h_layer == "last_hidden":
        if n < 2:
            raise ConfigError("network has no hidden layer; use h_layer='output'")
        return n - 1
    if isinstance(h_layer, (int, np.integer)) and 1 <= int(h_layer) <= n:
        return int(h_layer)
    raise ConfigError(f"invalid h_layer {h_layer!r} for a {n}-layer network")


@dataclass
class ForwardTrace:
    """Every intermediate of one forward pass over a batch of inputs.

    ``acts[0]`` is the input; ``pre[k]`` / ``acts[k + 1]`` belong to affine
    layer ``k``.  The output layer has no nonlinearity, so ``g`` is the final
    pre-activation.  For a 1-D input ``g`` and ``h`` are returned 1-D.
    """

    pre: list
    acts: list
    h_index: int
    single: bool = False

    @property
    def g(self):
        return self.pre[-1][0] if self.single else self.pre[-1]

    @property
    def h(self):
        H = self.hidden_matrix
        return H[0] if self.single else H

    @property
    def logits_matrix(self):
        return self.pre[-1]

    @property
    def hidden_matrix(self):
        if self.h_index == len(self.pre):
            return self.pre[-1]
        return self.acts[self.h_index]


def forward(params, x, h_layer="last_hidden"):
    if sparse.issparse(x):
        X = sparse.csr_matrix(x, dtype=np.float64)
        single = False
    else:
        X = np.asarray(x, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
    if X.ndim != 2 or X.shape[1] != params.layer_dims[0]:
        raise ShapeError(
            f"input has shape {np.shape(x)}, network expects {params.layer_dims[0]} features"
        )
    h_index = resolve_h_layer(params, h_layer)
    pre, acts = [], [X]
    layers = params.layers
    for k, (W, b) in enumerate(layers):
        z = acts[-1] @ W.T + b
        pre.append(z)
        if k < len(layers) - 1:
            acts.append(_act(z, params.activation))
    return ForwardTrace(pre, acts, h_index, single)


@dataclass
class LossValue:
    value: float
    gradient: object = None


def _check_ce_labels(y, L):
    y = np.asarray(y)
    if y.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise LabelError(f"class labels must be integers, got {y}")
        y = y.astype(np.int64)
    if np.any(y < 0) or np.any(y >= L):
        raise LabelError(f"label out of range [0, {L})")
    return y.astype(np.int64)


def supervised_losses(G, targets, kind="softmax-cross-entropy"):
    """Row-wise supervised losses and their gradients with respect to ``G``."""
    G = np.asarray(G, dtype=np.float64)
    n, L = G.shape
    if kind == "softmax-cross-entropy":
        y = _check_ce_labels(targets, L).reshape(-1)
        if len(y) != n:
            raise ShapeError("one label per row required")
        z = G - G.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        logp = z - lse[:, None]
        vals = -logp[np.arange(n), y]
        dG = np.exp(logp)
        dG[np.arange(n), y] -= 1.0
        return vals, dG
    T = np.asarray(targets, dtype=np.float64).reshape(n, -1)
    if T.shape != G.shape:
        raise ShapeError(f"target shape {T.shape} does not match outputs {G.shape}")
    if kind == "squared-l2":
        diff = G - T
        return (diff * diff).sum(axis=1), 2.0 * diff
    if kind == "sigmoid-cross-entropy":
        # softplus(g) - t*g, summed over one-vs-rest heads
        vals = (np.logaddexp(0.0, G) - T * G).sum(axis=1)
        sig = 0.5 * (1.0 + np.tanh(0.5 * G))
        return vals, sig - T
    raise ConfigError(f"unknown loss kind {kind!r}")


def supervised_cost(params, X, targets, kind="softmax-cross-entropy"):
    """Plain supervised cost: sum of per-example losses of the network outputs."""
    vals, _ = supervised_losses(forward(params, X, "output").logits_matrix, targets, kind)
    return float(np.sum(vals))


def supervised_loss(g, y, kind="softmax-cross-entropy"):
    """Loss of one output vector against one target; gradient is w.r.t. ``g``."""
    g = np.asarray(g, dtype=np.float64)
    vals, dG = supervised_losses(g[None, :], np.asarray(y)[None, ...], kind)
    return LossValue(float(vals[0]), dG[0])


def hidden_distance(h_u, h_v, metric="squared-l2", symmetric=False):
    """Distance between two hidden vectors with gradients for both endpoints.

    ``cross-entropy`` treats ``softmax(h_v)`` as the target and
    ``softmax(h_u)`` as the prediction, so it is not symmetric; pass
    ``symmetric=True`` to average both directions.
    """
    h_u = np.asarray(h_u, dtype=np.float64)
    h_v = np.asarray(h_v, dtype=np.float64)
    if h_u.shape != h_v.shape or h_u.ndim != 1:
        raise ShapeError(f"hidden vectors differ in shape: {h_u.shape} vs {h_v.shape}")
    value, dH = _backend.edge_distance(
        np.stack([h_u, h_v]), np.array([0]), np.array([1]), np.array([1.0]),
        metric_code(metric, symmetric),
    )
    return LossValue(value, (dH[0], dH[1]))


def pairwise_distances(H, a, b, metric="squared-l2", symmetric=False):
    """Per-pair distances ``d(H[a[k]], H[b[k]])`` without gradients."""
    metric_code(metric, symmetric)
    hu, hv = H[np.asarray(a, dtype=np.int64)], H[np.asarray(b, dtype=np.int64)]
    if metric == "l1":
        return np.abs(hu - hv).sum(axis=1)
    if metric == "squared-l2":
        return ((hu - hv) ** 2).sum(axis=1)

    def log_softmax(z):
        z = z - z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    lu, lv = log_softmax(hu), log_softmax(hv)
    duv = -(np.exp(lv) * lu).sum(axis=1)
    if not symmetric:
        return duv
    return 0.5 * (duv - (np.exp(lu) * lv).sum(axis=1))


def metric_code(metric, symmetric=False):
    if metric not in METRICS:
        raise ConfigError(f"unknown distance metric {metric!r}")
    if metric == "cross-entropy" and symmetric:
        return "cross-entropy-symmetric"
    return metric


@dataclass
class LossSpec:
    """A weighted sum of supervised and distance terms over rows of one batch.

    Supervised term ``i`` is ``sup_weights[i] * c(g[sup_rows[i]], sup_targets[i])``;
    distance term ``k`` is ``dist_weights[k] * d(h[dist_a[k]], h[dist_b[k]])``.
    """

    sup_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    sup_targets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    sup_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dist_a: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dist_b: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dist_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kind: str = "softmax-cross-entropy"
    metric: str = "squared-l2"
    symmetric: bool = False


def backward(params, trace, dG, dH=None):
    """Backpropagate output and hidden-layer gradients into a flat parameter gradient.

    ``dG`` is the gradient w.r.t. the logits matrix, ``dH`` (optional) the
    gradient w.r.t. the configured hidden representation.
    """
    layers = params.layers
    n = len(layers)
    grads = [None] * n
    delta = np.array(dG, dtype=np.float64, copy=True)
    if dH is not None and trace.h_index == n:
        delta += dH
    for k in range(n - 1, -1, -1):
        W, _ = layers[k]
        a_prev = trace.acts[k]
        gW = (a_prev.T @ delta).T if sparse.issparse(a_prev) else delta.T @ a_prev
        grads[k] = (np.asarray(gW), delta.sum(axis=0))
        if k == 0:
            break
        da = delta @ W
        if dH is not None and trace.h_index == k:
            da += dH
        delta = da * _act_grad(trace.pre[k - 1], trace.acts[k], params.activation)
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def loss_and_grad(params, X, spec, h_layer="last_hidden", need_grad=True):
    """Evaluate a :class:`LossSpec` on inputs ``X`` and optionally its gradient."""
    trace = forward(params, X if sparse.issparse(X) else np.atleast_2d(X), h_layer)
    G = trace.logits_matrix
    H = trace.hidden_matrix
    dG = np.zeros_like(G)
    value = 0.0
    rows = np.asarray(spec.sup_rows, dtype=np.int64)
    if len(rows):
        w = np.asarray(spec.sup_weights, dtype=np.float64)
        vals, dg = supervised_losses(G[rows], spec.sup_targets, spec.kind)
        value = float(np.dot(w, vals))
        np.add.at(dG, rows, w[:, None] * dg)
    dH = None
    if len(spec.dist_a):
        dvalue, dH = _backend.edge_distance(
            H, spec.dist_a, spec.dist_b, spec.dist_weights,
            metric_code(spec.metric, spec.symmetric),
        )
        value += dvalue
    if not need_grad:
        return value, None
    return value, backward(params, trace, dG, dH)


def finite_diff_grad(params, loss_fn, epsilon=1e-5):
    """Central-difference gradient of ``loss_fn(params)``, one coordinate at a time."""
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    theta = params.flat.copy()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + epsilon
        up = loss_fn(params.with_flat(theta.copy()))
        theta[i] = orig - epsilon
        down = loss_fn(params.with_flat(theta.copy()))
        theta[i] = orig
        grad[i] = (up - down) / (2.0 * epsilon)
    return grad


def sgd_step(params, grad, lr, momentum=0.0, velocity=None):
    """One SGD update with optional classical momentum.

    ``v <- momentum * v + grad``; ``theta <- theta - lr * v``.  Returns the new
    parameters and velocity; the inputs are left untouched.
    """
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.flat.shape:
        raise ShapeError("gradient does not match parameter vector")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise NumericFault(
            "non-finite gradient entries",
            {"n_bad": int(bad.size), "first_bad_index": int(bad[0])},
        )
    if velocity is None or momentum == 0.0:
        v = grad.copy()
    else:
        v = momentum * velocity + grad
    return params.with_flat(params.flat - lr * v), v
