"""Readers and writers for the TSV data formats and the model file.

Edge list   ``u<TAB>v[<TAB>w]``; optional ``# n_nodes=N`` header.
Features    ``node<TAB>v1,v2,...`` (dense) or ``node<TAB>idx:val idx:val`` (sparse);
            optional ``# shape=N,D`` header.
Labels      ``node<TAB>label`` or ``node<TAB>l1,l2,...`` for multi-label rows.

Lines starting with ``#`` are comments.  Floats are written with ``repr`` so
that every file round-trips exactly.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DataError, GraphValidationError
from .graph import Graph
from .nn import ModelParams

MODEL_FORMAT = "graphreg-model"
MODEL_VERSION = 1


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            yield lineno, line


def _header_value(line, key):
    body = line.lstrip("#").strip()
    if body.startswith(key + "="):
        return body[len(key) + 1:]
    return None


def _parse_int(tok, path, lineno, what):
    try:
        val = int(tok)
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse {what} {tok!r}") from None
    if val < 0:
        raise DataError(f"{path}:{lineno}: {what} must be nonnegative, got {val}")
    return val


def _parse_float(tok, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse number {tok!r}") from None


def read_edges(path, n_nodes=None):
    records = []
    declared = None
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        if line.startswith("#"):
            val = _header_value(line, "n_nodes")
            if val is not None:
                declared = _parse_int(val, path, lineno, "n_nodes")
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}")
        u = _parse_int(parts[0], path, lineno, "node id")
        v = _parse_int(parts[1], path, lineno, "node id")
        w = _parse_float(parts[2], path, lineno) if len(parts) == 3 else 1.0
        records.append((lineno, u, v, w))
    if n_nodes is None:
        n_nodes = declared
    if n_nodes is None:
        n_nodes = 1 + max((max(u, v) for _, u, v, _ in records), default=-1)
    g = Graph(n_nodes)
    for lineno, u, v, w in records:
        try:
            g.add_edge(u, v, w)
        except GraphValidationError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return g


def write_edges(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_nodes={graph.n_nodes}\n")
        for u, v, w in graph.edge_list():
            fh.write(f"{u}\t{v}\t{w!r}\n")


@dataclass
class FeatureTable:
    matrix: object
    present: np.ndarray

    @property
    def missing(self):
        return np.flatnonzero(~self.present)


def read_features(path, n_nodes=None, n_features=None):
    """Read a features file; sparse rows yield a CSR matrix, dense rows an array.

    Rows not listed in the file are zero and flagged in ``present``.
    """
    rows = {}
    is_sparse = None
    shape = None
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        if line.startswith("#"):
            val = _header_value(line, "shape")
            if val is not None:
                try:
                    shape = tuple(int(x) for x in val.split(","))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad shape header {val!r}") from None
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected node<TAB>values")
        node = _parse_int(parts[0], path, lineno, "node id")
        if node in rows:
            raise DataError(f"{path}:{lineno}: node {node} listed twice")
        body = parts[1].strip()
        row_sparse = ":" in body or body == ""
        if is_sparse is None:
            is_sparse = row_sparse
        elif is_sparse != row_sparse and body:
            raise DataError(f"{path}:{lineno}: mixes dense and sparse rows")
        if row_sparse:
            entries = []
            for tok in body.split():
                if ":" not in tok:
                    raise DataError(f"{path}:{lineno}: sparse entry {tok!r} lacks ':'")
                idx, val = tok.split(":", 1)
                entries.append((_parse_int(idx, path, lineno, "feature index"), _parse_float(val, path, lineno)))
            rows[node] = entries
        else:
            rows[node] = [_parse_float(t, path, lineno) for t in body.split(",")]
    if shape is not None:
        n_nodes = shape[0] if n_nodes is None else n_nodes
        n_features = shape[1] if n_features is None else n_features
    if n_nodes is None:
        n_nodes = 1 + max(rows, default=-1)
    present = np.zeros(n_nodes, dtype=bool)
    for node in rows:
        if node >= n_nodes:
            raise DataError(f"{path}: node {node} outside [0, {n_nodes})")
        present[node] = True
    if is_sparse:
        if n_features is None:
            n_features = 1 + max((i for ent in rows.values() for i, _ in ent), default=-1)
        r, c, d = [], [], []
        for node in sorted(rows):
            for i, val in rows[node]:
                if i >= n_features:
                    raise DataError(f"{path}: feature index {i} outside [0, {n_features})")
                r.append(node)
                c.append(i)
                d.append(val)
        M = sparse.csr_matrix((d, (r, c)), shape=(n_nodes, n_features), dtype=np.float64)
        M.sort_indices()
        return FeatureTable(M, present)
    widths = {len(v) for v in rows.values()}
    if len(widths) > 1:
        raise DataError(f"{path}: dense rows have differing lengths {sorted(widths)}")
    if n_features is None:
        n_features = widths.pop() if widths else 0
    M = np.zeros((n_nodes, n_features))
    for node, vals in rows.items():
        if len(vals) != n_features:
            raise DataError(f"{path}: node {node} has {len(vals)} values, expected {n_features}")
        M[node] = vals
    return FeatureTable(M, present)


def write_features(matrix, path, nodes=None):
    """Write dense arrays as comma rows and sparse matrices as ``idx:val`` rows."""
    n, D = matrix.shape
    nodes = range(n) if nodes is None else nodes
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# shape={n},{D}\n")
        if sparse.issparse(matrix):
            M = sparse.csr_matrix(matrix)
            M.sort_indices()
            for i in nodes:
                lo, hi = M.indptr[i], M.indptr[i + 1]
                body = " ".join(f"{j}:{float(v)!r}" for j, v in zip(M.indices[lo:hi], M.data[lo:hi]))
                fh.write(f"{i}\t{body}\n")
        else:
            M = np.asarray(matrix, dtype=np.float64)
            for i in nodes:
                fh.write(f"{i}\t{','.join(repr(float(v)) for v in M[i])}\n")


def read_labels(path):
    """Return ``{node: label}``; multi-label rows map to a tuple of labels."""
    out = {}
    for lineno, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected node<TAB>label")
        node = _parse_int(parts[0], path, lineno, "node id")
        if node in out:
            raise DataError(f"{path}:{lineno}: node {node} labeled twice")
        toks = [t for t in parts[1].split(",") if t.strip()]
        if not toks:
            raise DataError(f"{path}:{lineno}: empty label")
        labs = tuple(_parse_int(t.strip(), path, lineno, "label") for t in toks)
        out[node] = labs if "," in parts[1] else labs[0]
    return out


def write_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(labels):
            lab = labels[node]
            body = ",".join(str(int(x)) for x in lab) if isinstance(lab, (tuple, list)) else str(int(lab))
            fh.write(f"{node}\t{body}\n")


def labels_to_arrays(labels, n_nodes, n_labels=None):
    """Dense per-node label array plus a mask of which nodes are labeled.

    Single-label tables give an int array (``-1`` where unlabeled); tables with
    any multi-label row give a 0/1 matrix of width ``n_labels``.
    """
    mask = np.zeros(n_nodes, dtype=bool)
    for node in labels:
        if node >= n_nodes:
            raise DataError(f"labeled node {node} outside [0, {n_nodes})")
        mask[node] = True
    multi = any(isinstance(v, tuple) for v in labels.values())
    if not multi:
        y = np.full(n_nodes, -1, dtype=np.int64)
        for node, lab in labels.items():
            y[node] = lab
        return y, mask
    if n_labels is None:
        n_labels = 1 + max(max(v) if isinstance(v, tuple) else v for v in labels.values())
    Y = np.zeros((n_nodes, n_labels), dtype=np.int64)
    for node, lab in labels.items():
        Y[node, list(lab) if isinstance(lab, tuple) else [lab]] = 1
    return Y, mask


def save_model(params, path, extra=None):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_dims": list(params.layer_dims),
        "activation": params.activation,
        "values": [repr(float(x)) for x in params.flat],
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Returns ``(params, extra)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model format {doc.get('format')!r} v{doc.get('version')}")
    flat = np.array([float(x) for x in doc["values"]])
    return ModelParams(tuple(doc["layer_dims"]), doc["activation"], flat), doc.get("extra", {})
