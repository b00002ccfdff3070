"""Evaluation metrics: AUC-ROC, macro-F1, MRR, MAE."""
import numpy as np
from scipy.stats import rankdata


class SingleClassAUC(ValueError):
    pass


def auc_roc(scores, labels):
    """Rank-based AUC; tied scores count half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassAUC("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(pred, target):
    pred = np.asarray(pred)
    target = np.asarray(target)
    f1s = []
    for c in np.union1d(pred, target):
        tp = np.sum((pred == c) & (target == c))
        fp = np.sum((pred == c) & (target != c))
        fn = np.sum((pred != c) & (target == c))
        denom = 2 * tp + fp + fn
        f1s.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))


def reciprocal_ranks(logits, target):
    """1 / rank of the true label; ties rank the lower label index first."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    target = np.asarray(target, dtype=np.int64)
    true = logits[np.arange(len(target)), target][:, None]
    idx = np.arange(logits.shape[1])[None, :]
    ahead = (logits > true) | ((logits == true) & (idx < target[:, None]))
    return 1.0 / (1.0 + ahead.sum(axis=1))


def mrr(logits, target):
    return float(reciprocal_ranks(logits, target).mean())


def mae(pred, target):
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64))))


METRIC_NAMES = {"binary": "auc", "multiclass": "macro_f1", "ranking": "mrr", "regression": "mae"}
HIGHER_IS_BETTER = {"auc": True, "macro_f1": True, "mrr": True, "mae": False}


def evaluate(outputs, targets, kind):
    """Task metric from raw decoder outputs.

    ``outputs`` is ``(n, m)`` logits for classification/ranking or ``(n,)``
    values for regression.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets)
    if targets.size == 0:
        raise ValueError("no items to evaluate")
    if kind == "binary":
        return auc_roc(outputs[:, 1] - outputs[:, 0], targets)
    if kind == "multiclass":
        return macro_f1(outputs.argmax(axis=1), targets)
    if kind == "ranking":
        return mrr(outputs, targets)
    if kind == "regression":
        return mae(outputs, targets)
    raise ValueError(f"unknown task kind {kind!r}")
