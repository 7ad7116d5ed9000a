"""Ranking metrics on the logit scale: Mann-Whitney AUC and hard accuracy."""
from __future__ import annotations

import numpy as np

from .errors import InputError, UndefinedMetricError
from .network import sigmoid


def check_binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise InputError(f"labels must be 1-D, got shape {y.shape}")
    vals = np.unique(y)
    if not np.isin(vals, (0, 1)).all():
        raise InputError(f"labels must be binary 0/1, got values {vals}")
    return y.astype(np.int64)


def tied_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank (O(n log n))."""
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    n = scores.shape[0]
    # boundaries of tie groups in the sorted array
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    boundary[1:] = sorted_scores[1:] != sorted_scores[:-1]
    group_id = np.cumsum(boundary) - 1
    starts = np.flatnonzero(boundary)
    ends = np.append(starts[1:], n)
    avg_rank = (starts + 1 + ends) / 2.0  # mean of 1-based ranks within the group
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = avg_rank[group_id]
    return ranks


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Mann-Whitney estimator with ties counted half: computed from tied ranks,
    so any strictly increasing transform of the scores leaves it unchanged.

    Raises UndefinedMetricError when only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = check_binary_labels(labels)
    if scores.shape != y.shape:
        raise InputError(f"scores shape {scores.shape} != labels shape {y.shape}")
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    ranks = tied_ranks(scores)
    rank_sum_pos = float(ranks[y == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_or_none(scores, labels) -> float | None:
    """AUC, or None when undefined (single-class input)."""
    try:
        return auc(scores, labels)
    except UndefinedMetricError:
        return None


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Fraction of correct hard predictions.

    Scores are logits; the logistic link is applied before thresholding on
    the probability scale. Ties (probability exactly equal to the threshold)
    go to class 0: the rule is strictly greater.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = check_binary_labels(labels)
    if scores.shape != y.shape:
        raise InputError(f"scores shape {scores.shape} != labels shape {y.shape}")
    pred = (sigmoid(scores) > threshold).astype(np.int64)
    return float(np.mean(pred == y))
