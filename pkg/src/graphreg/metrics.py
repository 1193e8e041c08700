"""Classification and ranking metrics: F1 (macro/micro), accuracy, MRR."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LabelError, ShapeError


@dataclass
class EvalReport:
    macro_f1: float
    micro_f1: float
    accuracy: float
    mrr: float = None
    per_class: list = field(default_factory=list)
    n_examples: int = 0

    def to_dict(self):
        return asdict(self)


def _as_label_sets(labels):
    out = []
    for item in labels:
        if isinstance(item, (set, frozenset, list, tuple, np.ndarray)):
            out.append({int(x) for x in item})
        else:
            out.append({int(item)})
    return out


def f1_scores(predicted, truth, n_labels):
    """Macro and micro F1 over label sets.

    Each element of ``predicted``/``truth`` is either a single label or a
    collection of labels.  Precision, recall and F1 are defined as 0 when
    their denominator is 0.  Macro F1 averages over all ``n_labels`` classes.

    Returns ``(macro, micro, per_class)`` with ``per_class`` a list of dicts.
    """
    P = _as_label_sets(predicted)
    T = _as_label_sets(truth)
    if len(P) != len(T):
        raise ShapeError(f"{len(P)} predictions for {len(T)} ground-truth rows")
    tp = np.zeros(n_labels, dtype=np.int64)
    fp = np.zeros(n_labels, dtype=np.int64)
    fn = np.zeros(n_labels, dtype=np.int64)
    for p, t in zip(P, T):
        for lab in p | t:
            if not 0 <= lab < n_labels:
                raise LabelError(f"label {lab} outside [0, {n_labels})")
        for lab in p & t:
            tp[lab] += 1
        for lab in p - t:
            fp[lab] += 1
        for lab in t - p:
            fn[lab] += 1

    def f1(tp_, fp_, fn_):
        prec = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        rec = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        return prec, rec, (2 * prec * rec / (prec + rec) if prec + rec else 0.0)

    per_class = []
    for c in range(n_labels):
        prec, rec, f = f1(tp[c], fp[c], fn[c])
        per_class.append({
            "label": c, "precision": float(prec), "recall": float(rec), "f1": float(f),
            "tp": int(tp[c]), "fp": int(fp[c]), "fn": int(fn[c]),
        })
    macro = float(np.mean([row["f1"] for row in per_class])) if n_labels else 0.0
    micro = f1(tp.sum(), fp.sum(), fn.sum())[2]
    return macro, float(micro), per_class


def true_class_ranks(scores, truth):
    """1-based rank of the true class in each row.

    Classes scoring strictly higher rank ahead; among equal scores the lower
    class index ranks first.
    """
    S = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    y = np.asarray(truth, dtype=np.int64).reshape(-1)
    if len(y) != S.shape[0]:
        raise ShapeError("one true label per score row required")
    if np.any(y < 0) or np.any(y >= S.shape[1]):
        raise LabelError("true label outside score columns")
    s_true = S[np.arange(len(y)), y][:, None]
    cols = np.arange(S.shape[1])[None, :]
    ahead = (S > s_true) | ((S == s_true) & (cols < y[:, None]))
    return 1 + ahead.sum(axis=1)


def mrr(scores, truth):
    ranks = true_class_ranks(scores, truth)
    if len(ranks) == 0:
        raise ShapeError("MRR needs at least one example")
    return float(np.mean(1.0 / ranks))


def accuracy(predicted, truth):
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ShapeError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        return 0.0
    return float(np.mean(p == t))


def evaluate(pred_labels, true_labels, n_labels, scores=None):
    """Bundle every metric into an :class:`EvalReport`.

    For label-set inputs accuracy is the exact-set-match rate.
    """
    macro, micro, table = f1_scores(pred_labels, true_labels, n_labels)
    sets_p, sets_t = _as_label_sets(pred_labels), _as_label_sets(true_labels)
    return EvalReport(
        macro_f1=macro,
        micro_f1=micro,
        accuracy=float(np.mean([p == t for p, t in zip(sets_p, sets_t)])) if sets_t else 0.0,
        mrr=mrr(scores, true_labels) if scores is not None else None,
        per_class=table,
        n_examples=len(true_labels),
    )
