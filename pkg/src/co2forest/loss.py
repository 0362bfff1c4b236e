"""Leaf distributions, per-leaf losses, stump loss, and information gain.

A decision stump is a weight vector ``w`` over augmented inputs plus two
leaf parameter vectors of unnormalized log-probabilities. Examples with
``w @ x >= 0`` are routed to the right leaf (``theta1``), the rest to the
left (``theta0``); ties at exactly zero go right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class StumpParams:
    """One oblique split: weights (offset in the last slot) and two leaves."""

    w: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray

    def copy(self) -> "StumpParams":
        return StumpParams(self.w.copy(), self.theta0.copy(), self.theta1.copy())


def softmax_prob(theta: np.ndarray) -> np.ndarray:
    """Normalized class probabilities from unnormalized log-probabilities."""
    theta = np.asarray(theta, dtype=np.float64)
    e = np.exp(theta - theta.max())
    return e / e.sum()


def _logsumexp(theta: np.ndarray) -> float:
    m = theta.max()
    return float(m + np.log(np.exp(theta - m).sum()))


def _check_class(theta: np.ndarray, y: int) -> None:
    if not 0 <= y < theta.shape[0]:
        raise ValueError(f"class index {y} out of range [0, {theta.shape[0]})")


def log_loss(theta: np.ndarray, y: int) -> float:
    """Multinomial log loss -theta[y] + logsumexp(theta)."""
    theta = np.asarray(theta, dtype=np.float64)
    _check_class(theta, y)
    return _logsumexp(theta) - float(theta[y])


def log_loss_grad(theta: np.ndarray, y: int) -> np.ndarray:
    """Gradient of log_loss wrt theta: softmax(theta) - onehot(y)."""
    theta = np.asarray(theta, dtype=np.float64)
    _check_class(theta, y)
    g = softmax_prob(theta)
    g[y] -= 1.0
    return g


def squared_loss(theta: np.ndarray, y_vec: np.ndarray) -> float:
    """Squared loss ||theta - y||^2 against a target vector."""
    theta = np.asarray(theta, dtype=np.float64)
    y_vec = np.asarray(y_vec, dtype=np.float64)
    if theta.shape != y_vec.shape:
        raise ValueError(f"dimension mismatch: {theta.shape} vs {y_vec.shape}")
    diff = theta - y_vec
    return float(diff @ diff)


def squared_loss_grad(theta: np.ndarray, y_vec: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    y_vec = np.asarray(y_vec, dtype=np.float64)
    if theta.shape != y_vec.shape:
        raise ValueError(f"dimension mismatch: {theta.shape} vs {y_vec.shape}")
    return 2.0 * (theta - y_vec)


class LogLoss:
    """Log loss as a pluggable per-leaf loss over class indices.

    ``values`` and ``grad_sum`` are the batch forms used by the stump
    optimizers: with a shared theta, logsumexp and softmax are computed
    once per batch.
    """

    def value(self, theta, y):
        return log_loss(theta, y)

    def grad(self, theta, y):
        return log_loss_grad(theta, y)

    def values(self, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return _logsumexp(theta) - theta[y]

    def grad_sum(self, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        k = theta.shape[0]
        if len(y) == 0:
            return np.zeros(k)
        return len(y) * softmax_prob(theta) - np.bincount(y, minlength=k)


class SquaredLoss:
    """Squared loss against one-hot targets, over class indices."""

    def value(self, theta, y):
        onehot = np.zeros(len(theta))
        onehot[y] = 1.0
        return squared_loss(theta, onehot)

    def grad(self, theta, y):
        onehot = np.zeros(len(theta))
        onehot[y] = 1.0
        return squared_loss_grad(theta, onehot)

    def values(self, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return float(theta @ theta) - 2.0 * theta[y] + 1.0

    def grad_sum(self, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        k = theta.shape[0]
        if len(y) == 0:
            return np.zeros(k)
        return 2.0 * (len(y) * theta - np.bincount(y, minlength=k))


LOG_LOSS = LogLoss()
SQUARED_LOSS = SquaredLoss()


def optimal_leaf_logloss(label_counts: np.ndarray, smoothing: float = 1.0) -> np.ndarray:
    """Leaf log-probabilities log((counts + eps) / (total + k*eps)).

    With smoothing 0 this is the exact minimizer of the summed log loss
    over the leaf's examples; entries for absent classes are then -inf,
    which downstream softmax/log-loss code handles. Smoothing 1 (Laplace)
    is the default for stored leaves.
    """
    counts = np.asarray(label_counts, dtype=np.float64)
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    total = counts.sum()
    if total < 1:
        raise ValueError("leaf has no examples")
    k = counts.shape[0]
    with np.errstate(divide="ignore"):
        return np.log(counts + smoothing) - np.log(total + k * smoothing)


def stump_empirical_loss(s: StumpParams, d, per_leaf_loss=LOG_LOSS, indices=None) -> float:
    """Sum of per-example leaf losses under hard routing by sign(w @ x)."""
    x, y = _node_view(d, indices)
    if len(y) == 0:
        return 0.0
    right = x @ s.w >= 0
    total = per_leaf_loss.values(s.theta0, y[~right]).sum()
    total += per_leaf_loss.values(s.theta1, y[right]).sum()
    return float(total)


def _node_view(d, indices):
    """(x, y) rows of a Dataset, optionally restricted to an index array."""
    if indices is None:
        return d.x, d.y
    indices = np.asarray(indices, dtype=np.int64)
    return d.x[indices], d.y[indices]


def _entropy_from_counts(counts: np.ndarray) -> float:
    """Natural-log entropy of a count vector; 0*log 0 = 0."""
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def information_gain(left_labels, right_labels) -> float:
    """Parent entropy minus size-weighted child entropies (natural log)."""
    left = np.asarray(left_labels, dtype=np.int64)
    right = np.asarray(right_labels, dtype=np.int64)
    n = len(left) + len(right)
    if n < 1:
        raise ValueError("information gain of an empty split")
    width = int(max(left.max(initial=0), right.max(initial=0))) + 1
    lc = np.bincount(left, minlength=width)
    rc = np.bincount(right, minlength=width)
    h_parent = _entropy_from_counts(lc + rc)
    h_left = _entropy_from_counts(lc)
    h_right = _entropy_from_counts(rc)
    return h_parent - (len(left) * h_left + len(right) * h_right) / n
