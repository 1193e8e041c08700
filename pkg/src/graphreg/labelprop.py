"""Graph label propagation: quadratic objective, Jacobi solver, direct solver.

The neighbour term of the objective enumerates every undirected edge from
both endpoints, so each edge contributes ``2 * mu2 * w * ||Y_u - Y_v||^2``.
The Jacobi update below is the exact coordinate minimiser of that objective,
which is why neighbour weights enter it as ``2 * mu2 * w``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigError, DataError, ShapeError, SingularSystemError

SIMPLEX_TOL = 1e-9
DIRECT_SOLVE_MAX_NODES = 200


@dataclass
class LPConfig:
    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 0.01
    max_iter: int = 10000
    tol: float = 1e-8

    def __post_init__(self):
        for name in ("mu1", "mu2", "mu3"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {val}")
        if not (self.mu1 > 0 or self.mu3 > 0):
            raise ConfigError("need mu1 > 0 or mu3 > 0")
        if self.max_iter < 1 or not self.tol > 0:
            raise ConfigError("max_iter must be >= 1 and tol > 0")


@dataclass
class PropagationReport:
    converged: bool
    iterations: int
    max_change: float
    stuck_nodes: list = field(default_factory=list)
    max_simplex_error: float = 0.0

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "max_change": self.max_change,
            "stuck_nodes": list(self.stuck_nodes),
            "max_simplex_error": self.max_simplex_error,
        }


@dataclass
class LabelDistribution:
    Y_hat: np.ndarray
    report: PropagationReport = None


def _check_simplex_rows(M, what):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.size and (np.any(M < -SIMPLEX_TOL) or np.any(np.abs(M.sum(axis=1) - 1.0) > SIMPLEX_TOL)):
        raise DataError(f"{what} rows must be nonnegative and sum to 1")
    return M


def _prepare(graph, seed_nodes, Y, U):
    seed_nodes = np.asarray(seed_nodes, dtype=np.int64).reshape(-1)
    U = _check_simplex_rows(U, "prior")[0]
    L = U.shape[0]
    Y = _check_simplex_rows(np.asarray(Y, dtype=np.float64).reshape(-1, L), "seed distribution")
    if len(Y) != len(seed_nodes):
        raise ShapeError("one seed distribution per seed node required")
    if len(np.unique(seed_nodes)) != len(seed_nodes):
        raise DataError("seed nodes must be distinct")
    if len(seed_nodes) and (seed_nodes.min() < 0 or seed_nodes.max() >= graph.n_nodes):
        raise DataError("seed node id outside the graph")
    return seed_nodes, Y, U


def _linear_terms(n, seed_nodes, Y, U, mu1, mu3):
    """Per-node constant numerator and denominator parts of the update."""
    L = U.shape[0]
    num = np.tile(mu3 * U, (n, 1))
    den = np.full(n, float(mu3))
    num[seed_nodes] += mu1 * Y
    den[seed_nodes] += mu1
    return num, den


def lp_objective(Y_hat, graph, seed_nodes, Y, U, mu1, mu2, mu3):
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if Y_hat.shape != (graph.n_nodes, U.shape[0]):
        raise ShapeError(f"Y_hat has shape {Y_hat.shape}, expected ({graph.n_nodes}, {U.shape[0]})")
    seed_nodes = np.asarray(seed_nodes, dtype=np.int64).reshape(-1)
    Y = np.asarray(Y, dtype=np.float64).reshape(len(seed_nodes), U.shape[0])
    seed_term = np.sum((Y_hat[seed_nodes] - Y) ** 2)
    diff = Y_hat[graph.edges_u] - Y_hat[graph.edges_v]
    edge_term = 2.0 * np.dot(graph.weights, np.sum(diff * diff, axis=1)) if graph.n_edges else 0.0
    prior_term = np.sum((Y_hat - U) ** 2)
    return float(mu1 * seed_term + mu2 * edge_term + mu3 * prior_term)


def jacobi_propagate(graph, seed_nodes, Y, U=None, config=None, check_simplex=True):
    """Iterate simultaneous neighbour-averaging updates to the fixed point.

    Seeds start at their given distribution and every other node at the
    prior ``U`` (uniform when omitted).  Each sweep replaces every row by a
    convex combination of simplex rows, so iterates stay on the simplex.
    Nodes with a zero denominator keep their initial row and are listed in
    ``report.stuck_nodes``.
    """
    config = config or LPConfig()
    if U is None:
        n_seeds = len(np.atleast_1d(seed_nodes))
        if n_seeds == 0:
            raise DataError("a prior U is required when there are no seed nodes")
        L = np.asarray(Y).reshape(n_seeds, -1).shape[1]
        U = np.full(L, 1.0 / L)
    seed_nodes, Y, U = _prepare(graph, seed_nodes, Y, U)
    n, L = graph.n_nodes, U.shape[0]
    num, den = _linear_terms(n, seed_nodes, Y, U, config.mu1, config.mu3)
    A = graph.adjacency
    nbr_scale = 2.0 * config.mu2
    stuck = np.flatnonzero(den + nbr_scale * np.asarray(A.sum(axis=1)).ravel() == 0).tolist()

    cur = np.tile(U, (n, 1))
    cur[seed_nodes] = Y
    nxt = np.empty_like(cur)
    change = np.inf
    simplex_err = 0.0
    it = 0
    converged = False
    while it < config.max_iter:
        change = _backend.jacobi_sweep(A.indptr, A.indices, A.data, cur, num, den, nbr_scale, nxt)
        it += 1
        if check_simplex and n:
            simplex_err = max(
                simplex_err,
                float(np.max(np.abs(nxt.sum(axis=1) - 1.0))),
                float(max(0.0, -nxt.min())),
            )
        cur, nxt = nxt, cur
        if change < config.tol:
            converged = True
            break
    report = PropagationReport(converged, it, float(change), stuck, simplex_err)
    return LabelDistribution(cur, report)


def direct_solve(graph, seed_nodes, Y, U, mu1, mu2, mu3):
    """Solve the stationarity system of the objective by dense elimination.

    Each label column satisfies ``M y = b`` with
    ``M = diag(mu1*[v seeded] + mu3 + 2*mu2*deg_v) - 2*mu2*W``.
    Limited to small graphs; meant as a reference for the iterative solver.
    """
    n = graph.n_nodes
    if n > DIRECT_SOLVE_MAX_NODES:
        raise ConfigError(f"direct_solve is limited to {DIRECT_SOLVE_MAX_NODES} nodes, got {n}")
    seed_nodes, Y, U = _prepare(graph, seed_nodes, Y, U)
    num, den = _linear_terms(n, seed_nodes, Y, U, mu1, mu3)
    W = graph.adjacency.toarray()
    M = np.diag(den + 2.0 * mu2 * W.sum(axis=1)) - 2.0 * mu2 * W
    if n and (np.any(np.diag(M) == 0) or np.linalg.cond(M) > 1e12):
        raise SingularSystemError("label propagation system is singular; need mu1 or mu3 coverage on every component")
    try:
        sol = np.linalg.solve(M, num) if n else np.zeros((0, U.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return LabelDistribution(sol)


def lp_predict(Y_hat):
    """Hard labels by row-wise argmax; ties go to the lowest label index."""
    return np.argmax(np.asarray(Y_hat), axis=1)
