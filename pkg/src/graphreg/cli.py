"""Command-line entry point: ``graphreg <command> [options]``.

Exit codes: 0 success, 1 data/config error, 2 numeric fault, 3 non-convergence.
Options may also come from an INI file (``--config``) with one section per
command; keys are option names with dashes or underscores, and command-line
flags override file values.
"""

import argparse
import configparser
import json
import sys
import warnings

import numpy as np

from . import io
from .errors import ConfigError, DataError, GraphRegError, NonConvergenceError
from .graph import adjacency_features, knn_graph, sbm_generate
from .labelprop import LPConfig, jacobi_propagate
from .metrics import evaluate
from .trainer import NGMConfig, predict, predict_multilabel, self_train, train


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _h_layer(text):
    text = str(text)
    return int(text) if text.isdigit() else text


def _bool(text):
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _effective_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _check_covered(table, nodes, what):
    missing = [int(n) for n in nodes if n >= len(table.present) or not table.present[n]]
    if missing:
        raise DataError(f"{what}: no features for nodes {missing[:50]}"
                        + (" ..." if len(missing) > 50 else ""))


# -- build-graph --------------------------------------------------------------

def cmd_build_graph(args):
    if bool(args.edges) == bool(args.embeddings):
        raise ConfigError("give exactly one of --edges or --embeddings")
    if args.edges:
        g = io.read_edges(args.edges, n_nodes=args.n_nodes)
        if g.n_edges == 0:
            warnings.warn(f"{args.edges}: graph has no edges")
    else:
        table = io.read_features(args.embeddings)
        X = table.matrix.toarray() if hasattr(table.matrix, "toarray") else table.matrix
        g = knn_graph(X, args.k, args.threshold)
    if args.out:
        io.write_edges(g, args.out)
    if args.features_out:
        io.write_features(adjacency_features(g), args.features_out)
    deg = g.incident_count
    _emit({
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "degree": {
            "min": int(deg.min()) if g.n_nodes else 0,
            "mean": float(deg.mean()) if g.n_nodes else 0.0,
            "max": int(deg.max()) if g.n_nodes else 0,
        },
        "config": _effective_config(args),
    })
    return 0


# -- propagate ----------------------------------------------------------------

def cmd_propagate(args):
    g = io.read_edges(args.edges, n_nodes=args.n_nodes)
    seeds = io.read_labels(args.seeds)
    L = args.n_labels or 1 + max(
        (max(v) if isinstance(v, tuple) else v for v in seeds.values()), default=0
    )
    nodes = np.array(sorted(seeds), dtype=np.int64)
    Y = np.zeros((len(nodes), L))
    for i, node in enumerate(nodes):
        labs = seeds[node] if isinstance(seeds[node], tuple) else (seeds[node],)
        if max(labs) >= L:
            raise DataError(f"seed label {max(labs)} outside [0, {L})")
        Y[i, list(labs)] = 1.0 / len(labs)
    cfg = LPConfig(args.mu1, args.mu2, args.mu3, args.max_iter, args.tol)
    dist = jacobi_propagate(g, nodes, Y, np.full(L, 1.0 / L), cfg)
    if args.out:
        io.write_features(dist.Y_hat, args.out)
    report = {"convergence": dist.report.to_dict(), "n_labels": L, "config": _effective_config(args)}
    _emit(report, args.report)
    if not dist.report.converged:
        raise NonConvergenceError(
            f"no convergence within {cfg.max_iter} sweeps (max change {dist.report.max_change:.3g})",
            report,
        )
    return 0


# -- train / self-train -------------------------------------------------------

def _ngm_config(args):
    alpha = _floats(args.alpha)
    if len(alpha) == 1:
        alpha = alpha * 3
    return NGMConfig(
        hidden=_ints(args.hidden),
        activation=args.activation,
        alpha=alpha,
        metric=args.metric,
        symmetric_ce=args.symmetric_ce,
        h_layer=_h_layer(args.h_layer),
        lr=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        sampler=args.sampler,
        drop_uu=args.drop_uu,
        node_batch_size=args.node_batch_size,
        n_labels=args.n_labels,
        seed=args.seed,
    )


def _load_training_data(args):
    g = io.read_edges(args.edges, n_nodes=args.n_nodes)
    table = io.read_features(args.features, n_nodes=g.n_nodes)
    labels = io.read_labels(args.labels)
    eval_table = io.read_labels(args.eval_labels) if args.eval_labels else {}
    overlap = sorted(set(labels) & set(eval_table))
    if overlap:
        raise DataError(f"nodes both in training and evaluation labels: {overlap[:20]}")
    _check_covered(table, list(labels) + list(eval_table), args.features)
    y, mask = io.labels_to_arrays(labels, g.n_nodes, args.n_labels)
    if y.ndim == 1:
        y = np.where(mask, y, 0)
    eval_nodes = np.array(sorted(eval_table), dtype=np.int64)
    eval_y = None
    if len(eval_nodes):
        if y.ndim == 2:
            eval_y, _ = io.labels_to_arrays(eval_table, g.n_nodes, y.shape[1])
            eval_y = eval_y[eval_nodes]
        else:
            eval_y = np.array([eval_table[n] for n in eval_nodes], dtype=np.int64)
    mode = "transductive"
    if args.inductive:
        if not len(eval_nodes):
            raise ConfigError("--inductive needs --eval-labels to know which nodes to hold out")
        g = g.subgraph_without(eval_nodes)
        mode = "inductive"
    return g, table.matrix, y, mask, (eval_nodes if len(eval_nodes) else None), eval_y, mode


def _run_training(args, rounds=None):
    cfg = _ngm_config(args)
    g, X, y, mask, eval_nodes, eval_y, mode = _load_training_data(args)
    if rounds is None:
        hist = train(g, X, y, mask, cfg, eval_nodes, eval_y)
    else:
        hist = self_train(g, X, y, mask, cfg, rounds, eval_nodes, eval_y)
    hist.metadata["graph_mode"] = mode
    hist.metadata["run_config"] = _effective_config(args)
    if args.model_out:
        io.save_model(hist.params, args.model_out, {
            "loss": hist.metadata["loss"],
            "n_labels": hist.metadata["n_labels"],
            "h_layer": cfg.h_layer,
        })
    _emit(hist.to_dict(), args.history_out)
    return 0


def cmd_train(args):
    return _run_training(args)


def cmd_self_train(args):
    return _run_training(args, rounds=args.rounds)


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args):
    params, extra = io.load_model(args.model)
    table = io.read_features(args.features)
    truth = io.read_labels(args.labels)
    nodes = np.array(sorted(truth), dtype=np.int64)
    _check_covered(table, nodes, args.features)
    X = table.matrix[nodes]
    L = params.n_outputs
    if extra.get("loss") == "sigmoid-cross-entropy":
        pred, scores = predict_multilabel(params, X)
        pred_sets = [tuple(np.flatnonzero(r)) for r in pred]
        true_sets = [t if isinstance(t, tuple) else (t,) for t in (truth[n] for n in nodes)]
        report = evaluate(pred_sets, true_sets, L)
    else:
        pred, scores = predict(params, X)
        true = np.array([truth[n] for n in nodes], dtype=np.int64)
        report = evaluate(pred, true, L, scores=scores)
    out = report.to_dict()
    out["config"] = _effective_config(args)
    _emit(out, args.out)
    return 0


# -- sbm ----------------------------------------------------------------------

def cmd_sbm(args):
    import os

    g, feats, y = sbm_generate(args.blocks, args.nodes_per_block, args.p_in, args.p_out,
                               args.feature_noise, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    path = lambda name: os.path.join(args.out_dir, name)  # noqa: E731
    io.write_edges(g, path("edges.tsv"))
    io.write_features(feats, path("features.tsv"))
    io.write_features(adjacency_features(g), path("adjacency_features.tsv"))
    io.write_labels({i: int(v) for i, v in enumerate(y)}, path("labels.tsv"))
    if args.labeled_per_block:
        rng = np.random.default_rng([args.seed, 2])
        train_nodes = []
        for b in range(args.blocks):
            members = np.arange(b * args.nodes_per_block, (b + 1) * args.nodes_per_block)
            train_nodes.extend(rng.choice(members, args.labeled_per_block, replace=False).tolist())
        train_set = set(train_nodes)
        io.write_labels({i: int(y[i]) for i in train_set}, path("train_labels.tsv"))
        io.write_labels({i: int(y[i]) for i in range(len(y)) if i not in train_set}, path("test_labels.tsv"))
    _emit({"n_nodes": g.n_nodes, "n_edges": g.n_edges, "out_dir": args.out_dir,
           "config": _effective_config(args)})
    return 0


# -- experiment ---------------------------------------------------------------

def cmd_experiment(args):
    from .experiments import benefit_experiment

    result = benefit_experiment(args.seeds, args.alpha, args.labeled_per_block)
    for row in result["trials"]:
        print(f"seed {row['seed']:2d}  baseline {row['baseline']:.3f}  ngm {row['ngm']:.3f}", file=sys.stderr)
    _emit(result, args.out)
    return 0


# -- parser -------------------------------------------------------------------

def _add_training_args(p):
    p.add_argument("--edges", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True, help="training labels TSV")
    p.add_argument("--eval-labels", help="held-out labels TSV, scored every epoch")
    p.add_argument("--inductive", action="store_true",
                   help="drop every edge touching an evaluation node before training")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--n-labels", type=int)
    p.add_argument("--hidden", default="50", help="comma-separated hidden layer sizes")
    p.add_argument("--activation", default="relu", choices=["relu", "tanh"])
    p.add_argument("--alpha", default="0.1", help="one value or alpha_LL,alpha_LU,alpha_UU")
    p.add_argument("--metric", default="squared-l2", choices=["l1", "squared-l2", "cross-entropy"])
    p.add_argument("--symmetric-ce", action="store_true")
    p.add_argument("--h-layer", default="last_hidden")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--node-batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--sampler", default="uniform", choices=["uniform", "neighborhood"])
    p.add_argument("--drop-uu", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out")
    p.add_argument("--history-out")


class _Parser(argparse.ArgumentParser):
    """Usage errors are config errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(prog="graphreg", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with one section per command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="read or construct a graph, emit edges and adjacency features")
    p.add_argument("--edges")
    p.add_argument("--embeddings", help="features-format file of node embeddings for a cosine kNN graph")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--out")
    p.add_argument("--features-out")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("propagate", help="label propagation by Jacobi iteration")
    p.add_argument("--edges", required=True)
    p.add_argument("--seeds", required=True, help="labels TSV of seed nodes")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--n-labels", type=int)
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=1.0)
    p.add_argument("--mu3", type=float, default=0.01)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="per-node distributions TSV")
    p.add_argument("--report", help="convergence report JSON (stdout if omitted)")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("train", help="graph-regularized network training")
    _add_training_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("self-train", help="training with neighbour self-labeling rounds")
    _add_training_args(p)
    p.add_argument("--rounds", type=int, default=3)
    p.set_defaults(func=cmd_self_train)

    p = sub.add_parser("evaluate", help="score a saved model on labeled nodes")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sbm", help="write a stochastic-block-model dataset")
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--nodes-per-block", type=int, default=40)
    p.add_argument("--p-in", type=float, default=0.3)
    p.add_argument("--p-out", type=float, default=0.02)
    p.add_argument("--feature-noise", type=float, default=0.1)
    p.add_argument("--labeled-per-block", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sbm)

    p = sub.add_parser("experiment", help="SBM comparison of graph-regularized vs plain training")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--labeled-per-block", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_config_file(parser, argv):
    """Install INI values for the chosen command as parser defaults."""
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    config_path, command = None, None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
        elif tok in subparsers.choices:
            command = tok
            break
    if not config_path or command is None:
        return
    ini = configparser.ConfigParser()
    if not ini.read(config_path):
        raise ConfigError(f"cannot read config file {config_path}")
    sp = subparsers.choices[command]
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    unknown_sections = set(ini.sections()) - set(subparsers.choices)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    if not ini.has_section(command):
        return
    defaults = {}
    for key, raw in ini.items(command):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"unknown key {key!r} in section [{command}]")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = _bool(raw)
        elif act.type is not None:
            try:
                defaults[dest] = act.type(raw)
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {key}") from None
        else:
            defaults[dest] = raw
        act.required = False
    sp.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except GraphRegError as exc:
        diag = getattr(exc, "diagnostics", None)
        print(f"error: {exc}" + (f" {json.dumps(diag, default=_json_default)}" if diag else ""),
              file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
