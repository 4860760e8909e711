"""Evaluation metrics for lambda selection and reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_CLIP = 1e-15


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n: int


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("metrics need at least one row")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def log_loss(y, p) -> float:
    y, p = _pair(y, p)
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def deviance(y, p) -> float:
    """Binomial deviance per row, i.e. twice the log-loss."""
    return 2.0 * log_loss(y, p)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of tied values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.size]
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1..end
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(y, scores) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Equals the probability that a random positive outscores a random
    negative, with ties counted as one half.
    """
    y, scores = _pair(y, scores)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc requires both classes to be present")
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def top_k_capture(y, scores, k: int) -> int:
    """Number of positives among the ``k`` highest scores.

    Ties at the boundary go to the earlier row (stable descending sort).
    """
    y, scores = _pair(y, scores)
    if k < 0 or k > y.size:
        raise ValueError(f"k={k} outside [0, {y.size}]")
    order = np.argsort(-scores, kind="stable")
    return int(y[order[:k]].sum())
