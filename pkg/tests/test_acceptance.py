"""Acceptance criteria, each checked at its stated tolerance.

Every test records a single ``criterion N: PASS|FAIL ...`` line, printed in the
terminal summary.  Criterion 9 needs an external dataset and is skipped unless
``GRAPHREG_PUBMED_DIR`` points at it.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from graphreg import nn
from graphreg.experiments import PROTOCOL, benefit_experiment, self_training_trial
from graphreg.graph import Graph, adjacency_features, partition_edges
from graphreg.labelprop import LPConfig, direct_solve, jacobi_propagate
from graphreg.metrics import accuracy, f1_scores, mrr
from graphreg.sampling import EdgeBatch
from graphreg.trainer import (
    NGMConfig, batch_loss_spec, edge_decomposed_objective, full_objective, predict, self_train,
    train, training_schedule,
)

from .conftest import ACCEPTANCE_LINES, random_graph


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def max_rel_err(a, f):
    return float(np.max(np.abs(a - f)) / max(np.max(np.abs(a)), np.max(np.abs(f)), 1e-300))


def test_criterion_1_gradient_check():
    rng = np.random.default_rng(101)
    combos = [("l1", "last_hidden"), ("l1", "output"), ("squared-l2", "last_hidden"),
              ("squared-l2", "output"), ("cross-entropy", "output")]
    start = time.perf_counter()
    worst = 0.0
    for case in range(200):
        metric, h_layer = combos[case % len(combos)]
        n, L, D = 10, 3, 4
        g = random_graph(rng, n, 0.5, weighted=True)
        mask = np.zeros(n, bool)
        mask[rng.choice(n, 5, replace=False)] = True
        part = partition_edges(g, mask)
        while min(len(part.ll), len(part.lu), len(part.uu)) == 0:
            g = random_graph(rng, n, 0.5, weighted=True)
            part = partition_edges(g, mask)
        cfg = NGMConfig(hidden=(5, 4), activation=("tanh", "relu")[case % 2], metric=metric,
                        h_layer=h_layer, alpha=tuple(rng.uniform(0.1, 1.0, 3)),
                        symmetric_ce=bool(case % 3 == 0) and metric == "cross-entropy")
        X, y = rng.normal(size=(n, D)), rng.integers(L, size=n)
        ids = rng.choice(g.n_edges, size=min(8, g.n_edges), replace=False)
        batch = EdgeBatch(ids, part.edge_type[ids])
        nodes, spec = batch_loss_spec(g, part, y, batch, None, 0.0, "softmax-cross-entropy", L, cfg, 1 / 8)
        params = nn.init_params([D, 5, 4, L], cfg.activation, seed=case)
        params.flat[:] += rng.normal(scale=0.1, size=params.flat.size)
        Xb = X[nodes]
        _, grad = nn.loss_and_grad(params, Xb, spec, h_layer)
        fd = nn.finite_diff_grad(params, lambda q: nn.loss_and_grad(q, Xb, spec, h_layer, False)[0], 1e-5)
        worst = max(worst, max_rel_err(grad, fd))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 60
    record(1, ok, f"200 minibatch gradients, worst max-norm relative error {worst:.2e} (< 1e-5), {elapsed:.1f}s")
    assert ok


def test_criterion_2_objective_equivalence():
    rng = np.random.default_rng(202)
    worst, with_isolated = 0.0, 0
    for case in range(100):
        n = int(rng.integers(3, 21))
        g = random_graph(rng, n, float(rng.uniform(0.05, 0.5)), weighted=True)
        mask = rng.random(n) < 0.5
        if case % 2:
            # cut every edge of a few labeled nodes
            lab = np.flatnonzero(mask)
            if len(lab):
                g = g.subgraph_without(rng.choice(lab, size=min(2, len(lab)), replace=False))
        if np.any(mask & (g.incident_count == 0)):
            with_isolated += 1
        metric, h_layer = [("l1", "last_hidden"), ("squared-l2", "last_hidden"), ("cross-entropy", "output")][case % 3]
        cfg = NGMConfig(hidden=(6,), activation="tanh", metric=metric, h_layer=h_layer,
                        alpha=tuple(rng.uniform(0, 1, 3)))
        X, y = rng.normal(size=(n, 4)), rng.integers(3, size=n)
        params = nn.init_params([4, 6, 3], "tanh", seed=case)
        part = partition_edges(g, mask)
        full = full_objective(params, g, part, X, y, cfg)
        dec = edge_decomposed_objective(params, g, part, X, y, cfg)
        worst = max(worst, abs(full - dec) / (1 + abs(full)))
    ok = worst < 1e-10 and with_isolated > 0
    record(2, ok, f"100 instances ({with_isolated} with isolated labeled nodes), worst relative gap {worst:.2e} (< 1e-10)")
    assert ok


def test_criterion_3_supervised_reduction():
    rng = np.random.default_rng(303)
    bitwise = True
    for _ in range(20):
        n = 15
        g = random_graph(rng, n, 0.3, weighted=True)
        mask = rng.random(n) < 0.5
        X, y = rng.normal(size=(n, 4)), rng.integers(3, size=n)
        params = nn.init_params([4, 6, 3], "tanh", seed=int(rng.integers(1000)))
        cfg = NGMConfig(hidden=(6,), activation="tanh", alpha=(0.0, 0.0, 0.0))
        lab = np.flatnonzero(mask)
        bitwise &= full_objective(params, g, partition_edges(g, mask), X, y, cfg) == nn.supervised_cost(params, X[lab], y[lab])

    # trajectory: edge-sampled training at alpha=0 against a supervised-only loop on the same schedule
    g = random_graph(rng, 20, 0.25, weighted=True).subgraph_without([0, 1])
    mask = np.zeros(20, bool)
    mask[[0, 1, 4, 7, 9, 12, 15, 18]] = True
    X, y = rng.normal(size=(20, 4)), rng.integers(3, size=20)
    cfg = NGMConfig(hidden=(6,), activation="tanh", alpha=(0.0, 0.0, 0.0), lr=0.05, momentum=0.5,
                    batch_size=5, epochs=5, n_labels=3, node_batch_size=2, seed=7)
    hist = train(g, X, y, mask, cfg)
    part = partition_edges(g, mask)
    params = nn.init_params([4, 6, 3], "tanh", seed=cfg.seed)
    velocity, deg = None, g.incident_count
    for step in training_schedule(g, part, y, cfg):
        rows, weights = [], []
        if step.edge_batch is not None:
            for e in step.edge_batch.edge_ids:
                for node in (g.edges_u[e], g.edges_v[e]):
                    if mask[node]:
                        rows.append(node)
                        weights.append(1.0 / deg[node])
        if step.node_batch is not None:
            rows.extend(step.node_batch.tolist())
            weights.extend([step.node_weight] * len(step.node_batch))
        rows = np.array(rows, dtype=np.int64)
        spec = nn.LossSpec(sup_rows=np.arange(len(rows)), sup_targets=y[rows],
                           sup_weights=np.array(weights) / cfg.batch_size)
        _, grad = nn.loss_and_grad(params, X[rows], spec, "output")
        params, velocity = nn.sgd_step(params, grad, cfg.lr, cfg.momentum, velocity)
    gap = float(np.max(np.abs(hist.params.flat - params.flat)))
    ok = bitwise and gap < 1e-12
    record(3, ok, f"alpha=0 objective bitwise equal to supervised cost: {bitwise}; "
                  f"trajectory max parameter gap {gap:.1e} (< 1e-12)")
    assert ok


def test_criterion_4_label_propagation_oracle():
    rng = np.random.default_rng(404)
    worst_gap, worst_simplex = 0.0, 0.0
    for _ in range(100):
        n, L = int(rng.integers(2, 11)), int(rng.integers(2, 5))
        g = random_graph(rng, n, float(rng.uniform(0.1, 0.7)), weighted=True)
        seeds = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        Y = rng.dirichlet(np.ones(L), size=len(seeds))
        U = rng.dirichlet(np.ones(L))
        mu = (float(rng.uniform(0.1, 2)), float(rng.uniform(0, 2)), float(rng.uniform(0.01, 1)))
        it = jacobi_propagate(g, seeds, Y, U, LPConfig(*mu, max_iter=200000, tol=1e-13))
        ref = direct_solve(g, seeds, Y, U, *mu)
        worst_gap = max(worst_gap, float(np.max(np.abs(it.Y_hat - ref.Y_hat))))
        worst_simplex = max(worst_simplex, it.report.max_simplex_error)
    ok = worst_gap < 1e-6 and worst_simplex < 1e-9
    record(4, ok, f"100 instances, worst entry gap {worst_gap:.1e} (< 1e-6), "
                  f"worst simplex deviation {worst_simplex:.1e} (< 1e-9)")
    assert ok


def test_criterion_5_adjacency_features():
    rows = adjacency_features(Graph(3, [(0, 1), (1, 2)])).toarray()
    expect = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
    ok = bool(np.array_equal(rows, expect))
    record(5, ok, f"3-node path rows {rows.astype(int).tolist()}")
    assert ok


@pytest.mark.slow
def test_criterion_6_semi_supervised_benefit():
    start = time.perf_counter()
    res = benefit_experiment(n_seeds=10, alpha=0.2, labeled_per_block=5)
    elapsed = time.perf_counter() - start
    gain, wins = res["gain_points"], res["ngm_wins"]
    ok = gain >= 3.0 and wins >= 8 and elapsed < 300
    record(6, ok, f"baseline {res['mean_baseline']:.3f}, NGM {res['mean_ngm']:.3f}, gain {gain:+.1f} points "
                  f"(need >= 3), wins {wins}/10 (need >= 8), {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_7_self_training():
    trials = [self_training_trial(seed) for seed in range(10)]
    growth_ok = True
    for t in trials:
        sizes = [r["n_labeled"] for r in t["rounds"]]
        strictly = all(b > a for a, b in zip(sizes, sizes[1:]))
        finished = len(t["rounds"]) == 3 or t["rounds"][-1]["closed"]
        growth_ok &= strictly and finished and t["seed_labels_kept"]
    single = float(np.mean([t["single_round_accuracy"] for t in trials]))
    final = float(np.mean([t["final_accuracy"] for t in trials]))
    ok = growth_ok and final >= single - 0.01
    record(7, ok, f"growth strictly increasing until closure with seeds kept: {growth_ok}; "
                  f"single-round {single:.3f}, after 3 rounds {final:.3f}")
    assert ok


def _brute_f1(P, T, L):
    f1s, TP, FP, FN = [], 0, 0, 0
    for c in range(L):
        tp = sum(c in p and c in t for p, t in zip(P, T))
        fp = sum(c in p and c not in t for p, t in zip(P, T))
        fn = sum(c not in p and c in t for p, t in zip(P, T))
        TP, FP, FN = TP + tp, FP + fp, FN + fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    prec = TP / (TP + FP) if TP + FP else 0.0
    rec = TP / (TP + FN) if TP + FN else 0.0
    return sum(f1s) / L, (2 * prec * rec / (prec + rec) if prec + rec else 0.0)


def test_criterion_8_metric_oracles():
    rng = np.random.default_rng(808)
    f1_bad = mrr_bad = acc_bad = 0
    for _ in range(1000):
        L, N = int(rng.integers(1, 6)), int(rng.integers(1, 25))
        P = [set(np.flatnonzero(rng.random(L) < 0.4).tolist()) for _ in range(N)]
        T = [set(np.flatnonzero(rng.random(L) < 0.4).tolist()) for _ in range(N)]
        macro, micro, _ = f1_scores(P, T, L)
        em, ei = _brute_f1(P, T, L)
        f1_bad += abs(macro - em) > 1e-12 or abs(micro - ei) > 1e-12
    for _ in range(1000):
        N, L = int(rng.integers(1, 30)), int(rng.integers(1, 6))
        S = rng.integers(0, 4, size=(N, L)).astype(float)
        y = rng.integers(L, size=N)
        ranks = [sorted(range(L), key=lambda j, r=S[i]: (-r[j], j)).index(y[i]) + 1 for i in range(N)]
        mrr_bad += abs(mrr(S, y) - np.mean([1 / r for r in ranks])) > 1e-12
    for _ in range(1000):
        N = int(rng.integers(1, 50))
        p, t = rng.integers(3, size=N), rng.integers(3, size=N)
        acc_bad += accuracy(p, t) != sum(int(a == b) for a, b in zip(p, t)) / N
    edges = mrr([[0.9, 0.1], [0.3, 0.7]], [0, 1]) == 1.0 and mrr([[0.9, 0.1], [0.3, 0.7]], [1, 0]) == 0.5
    ok = f1_bad == mrr_bad == acc_bad == 0 and edges
    record(8, ok, f"mismatches over 1000 cases each: F1 {f1_bad}, MRR {mrr_bad}, accuracy {acc_bad}; "
                  f"MRR edge values exact: {edges}")
    assert ok


PUBMED_DIR = os.environ.get("GRAPHREG_PUBMED_DIR")


@pytest.mark.slow
@pytest.mark.skipif(not PUBMED_DIR, reason="set GRAPHREG_PUBMED_DIR to run the optional citation-data check")
def test_criterion_9_pubmed():
    from graphreg import io

    path = lambda name: os.path.join(PUBMED_DIR, name)  # noqa: E731
    g = io.read_edges(path("edges.tsv"))
    X = io.read_features(path("features.tsv"), n_nodes=g.n_nodes).matrix
    train_labels = io.read_labels(path("train_labels.tsv"))
    test_labels = io.read_labels(path("test_labels.tsv"))
    y, mask = io.labels_to_arrays(train_labels, g.n_nodes)
    y = np.where(mask, y, 0)
    test = np.array(sorted(test_labels))
    y_test = np.array([test_labels[n] for n in test])
    g = g.subgraph_without(test)
    cfg = replace(PROTOCOL, hidden=(250, 100), activation="relu", alpha=(0.2,) * 3, n_labels=None,
                  lr=0.05, momentum=0.9, epochs=50)
    cfg = replace(cfg, n_labels=int(max(y.max(), y_test.max())) + 1)
    ngm = self_train(g, X, y, mask, cfg, rounds=3)
    base = train(g, X, y, mask, replace(cfg, alpha=(0.0, 0.0, 0.0)))
    acc_ngm = accuracy(predict(ngm.params, X[test])[0], y_test)
    acc_base = accuracy(predict(base.params, X[test])[0], y_test)
    ok = acc_ngm >= 0.72 and acc_ngm - acc_base >= 0.02
    record(9, ok, f"NGM {acc_ngm:.3f} (need >= 0.72), baseline {acc_base:.3f}, "
                  f"gain {100 * (acc_ngm - acc_base):+.1f} points (need >= 2)")
    assert ok
