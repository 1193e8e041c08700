"""Graph-regularized neural network training, label propagation and graph utilities."""

from ._backend import BACKEND
from .graph import Graph, adjacency_features, knn_graph, partition_edges, sbm_generate
from .labelprop import LPConfig, direct_solve, jacobi_propagate, lp_predict
from .metrics import accuracy, evaluate, f1_scores, mrr
from .trainer import NGMConfig, predict, self_train, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Graph", "LPConfig", "NGMConfig", "accuracy", "adjacency_features", "direct_solve",
    "evaluate", "f1_scores", "jacobi_propagate", "knn_graph", "lp_predict", "mrr", "partition_edges",
    "predict", "sbm_generate", "self_train", "train",
]
