"""Desk-scale experiments on stochastic-block-model graphs.

Both arms of a comparison share every hyperparameter except ``alpha``; the
protocol below is fixed and not tuned per arm.
"""

from dataclasses import replace

import numpy as np

from .graph import adjacency_features, sbm_generate
from .metrics import accuracy
from .trainer import NGMConfig, predict, self_train, train

SBM_SETUP = {"blocks": 3, "nodes_per_block": 40, "p_in": 0.3, "p_out": 0.02}

PROTOCOL = NGMConfig(
    hidden=(32, 16),
    activation="tanh",
    alpha=(0.0, 0.0, 0.0),
    metric="squared-l2",
    h_layer="last_hidden",
    lr=0.05,
    momentum=0.9,
    batch_size=32,
    epochs=50,
    n_labels=3,
    record_objective=False,
)


def sbm_split(seed, labeled_per_block, blocks=3, nodes_per_block=40, p_in=0.3, p_out=0.02):
    """SBM graph, adjacency-row features, true labels and a per-block labeled mask."""
    g, _, y = sbm_generate(blocks, nodes_per_block, p_in, p_out, seed=seed)
    rng = np.random.default_rng([seed, 2])
    mask = np.zeros(g.n_nodes, dtype=bool)
    for b in range(blocks):
        members = np.arange(b * nodes_per_block, (b + 1) * nodes_per_block)
        mask[rng.choice(members, labeled_per_block, replace=False)] = True
    return g, adjacency_features(g), y, mask


def benefit_trial(seed, alpha, labeled_per_block=5, config=PROTOCOL, setup=SBM_SETUP):
    """Test accuracy on unlabeled nodes after training with edge weight ``alpha``."""
    g, X, y, mask = sbm_split(seed, labeled_per_block, **setup)
    cfg = replace(config, alpha=(alpha,) * 3, seed=seed, n_labels=setup["blocks"])
    hist = train(g, X, y, mask, cfg)
    pred, _ = predict(hist.params, X[~mask])
    return accuracy(pred, y[~mask])


def benefit_experiment(n_seeds=10, alpha=0.2, labeled_per_block=5, config=PROTOCOL):
    rows = []
    for seed in range(n_seeds):
        base = benefit_trial(seed, 0.0, labeled_per_block, config)
        ngm = benefit_trial(seed, alpha, labeled_per_block, config)
        rows.append({"seed": seed, "baseline": base, "ngm": ngm})
    base = np.array([r["baseline"] for r in rows])
    ngm = np.array([r["ngm"] for r in rows])
    return {
        "trials": rows,
        "mean_baseline": float(base.mean()),
        "mean_ngm": float(ngm.mean()),
        "gain_points": float(100 * (ngm.mean() - base.mean())),
        "ngm_wins": int(np.sum(ngm > base)),
        "alpha": alpha,
        "config": replace(config, alpha=(alpha,) * 3).to_dict(),
    }


def self_training_trial(seed, rounds=3, labeled_per_block=2, alpha=0.2, config=PROTOCOL):
    """Self-train from a few seeds per block; compare against a single round.

    Accuracy is measured on the nodes that were unlabeled at the start.
    """
    g, X, y, mask = sbm_split(seed, labeled_per_block, **SBM_SETUP)
    cfg = replace(config, alpha=(alpha,) * 3, seed=seed, n_labels=SBM_SETUP["blocks"])
    labels = np.where(mask, y, 0)
    test = np.flatnonzero(~mask)
    one = self_train(g, X, labels, mask, cfg, rounds=1)
    many = self_train(g, X, labels, mask, cfg, rounds=rounds)
    acc_one = accuracy(predict(one.params, X[test])[0], y[test])
    acc_many = accuracy(predict(many.params, X[test])[0], y[test])
    return {
        "seed": seed,
        "single_round_accuracy": acc_one,
        "final_accuracy": acc_many,
        "rounds": many.rounds,
        "seed_labels_kept": bool(np.array_equal(many.final_labels[mask], y[mask])),
    }
