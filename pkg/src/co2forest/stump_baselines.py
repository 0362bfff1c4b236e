"""Axis-aligned split search and OC1-style oblique coordinate descent.

The axis search is the random-forest building block and also seeds the
oblique trainers: the best single-feature threshold among ``q`` randomly
sampled candidate features, scored by information gain over all midpoints
between consecutive distinct values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .loss import StumpParams, _entropy_from_counts, optimal_leaf_logloss


class NoValidSplit(Exception):
    """No admissible split at this node; the caller should make a leaf."""


@dataclass
class AxisSplit:
    """Test x[feature] - threshold >= 0 on raw (0-based) feature indices."""

    feature: int
    threshold: float


@dataclass
class Oc1Config:
    """Knobs of the coordinate-descent oblique search."""

    max_passes: int = 10
    n_perturbations: int = 5
    stagnation_eps: float = 1e-9
    seed: int = 0


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Natural-log entropy per row of a (m, k) count matrix."""
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / totals
        plogp = np.where(counts > 0, p * np.log(p), 0.0)
    return -plogp.sum(axis=1)


def _scan_feature(values: np.ndarray, labels: np.ndarray, k: int, h_parent: float):
    """Best midpoint threshold for one feature, or None if it is constant.

    Candidate cuts sit between consecutive distinct sorted values, so a
    returned threshold never equals a data value (absent exact ties).
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    lab = labels[order]
    cuts = np.nonzero(v[:-1] < v[1:])[0]
    if cuts.size == 0:
        return None
    n = len(v)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    prefix = np.cumsum(onehot, axis=0)
    left = prefix[cuts]
    right = prefix[-1] - left
    n_left = (cuts + 1).astype(np.float64)
    gains = h_parent - (n_left * _entropy_rows(left) + (n - n_left) * _entropy_rows(right)) / n
    j = int(np.argmax(gains))  # first max: lowest threshold wins ties
    return float(gains[j]), float((v[cuts[j]] + v[cuts[j] + 1]) / 2.0)


def best_axis_aligned_split(
    d, node_indices, q: int, rng: np.random.Generator
) -> tuple[AxisSplit, float]:
    """Exhaustive threshold search over q sampled features at a node.

    Ties are broken toward the lower feature index, then the lower
    threshold. Raises NoValidSplit when the node is degenerate (fewer than
    two examples or labels) or every candidate feature is constant.
    """
    node_indices = np.asarray(node_indices, dtype=np.int64)
    x = d.x[node_indices]
    y = d.y[node_indices]
    p_raw = d.p - 1
    if len(y) < 2 or np.all(y == y[0]):
        raise NoValidSplit("node is pure or too small")
    q = max(1, min(int(q), p_raw))
    features = np.sort(rng.choice(p_raw, size=q, replace=False))
    h_parent = _entropy_from_counts(np.bincount(y, minlength=d.k))

    best = None
    for f in features:
        hit = _scan_feature(x[:, f], y, d.k, h_parent)
        if hit is None:
            continue
        gain, threshold = hit
        if best is None or gain > best[0]:
            best = (gain, int(f), threshold)
    if best is None:
        raise NoValidSplit("all candidate features are constant")
    gain, feature, threshold = best
    return AxisSplit(feature=feature, threshold=threshold), gain


def axis_split_to_stump(split: AxisSplit, d, node_indices, smoothing: float = 1.0) -> StumpParams:
    """Lift an axis split into stump parameters.

    ``w`` is the feature's unit vector with the threshold in the
    homogeneous slot, so ``w @ [x; -1] = x[feature] - threshold``; leaves
    are fit in closed form on each side.
    """
    node_indices = np.asarray(node_indices, dtype=np.int64)
    w = np.zeros(d.p)
    w[split.feature] = 1.0
    w[d.p - 1] = split.threshold
    y = d.y[node_indices]
    right = d.x[node_indices, split.feature] - split.threshold >= 0
    theta0 = optimal_leaf_logloss(np.bincount(y[~right], minlength=d.k), smoothing)
    theta1 = optimal_leaf_logloss(np.bincount(y[right], minlength=d.k), smoothing)
    return StumpParams(w=w, theta0=theta0, theta1=theta1)


def _split_gain(z: np.ndarray, y: np.ndarray, k: int, h_parent: float) -> float:
    """Information gain of the partition sign(z); one-sided splits gain 0."""
    right = z >= 0
    n = len(y)
    rc = np.bincount(y[right], minlength=k)
    lc = np.bincount(y[~right], minlength=k)
    nl = int((~right).sum())
    return h_parent - (nl * _entropy_from_counts(lc) + (n - nl) * _entropy_from_counts(rc)) / n


def _best_coord_value(base: np.ndarray, xm: np.ndarray, y: np.ndarray, k: int, h_parent: float):
    """Best setting of one weight with the others fixed, or None.

    For each datum with a nonzero coordinate, the critical value where it
    switches sides is ``base / -xm``; candidates are those values, the
    midpoints between consecutive distinct ones, and one point beyond each
    extreme.
    """
    nz = xm != 0
    if not nz.any():
        return None
    u = np.unique(base[nz] / -xm[nz])
    candidates = np.concatenate([[u[0] - 1.0], u, (u[:-1] + u[1:]) / 2.0, [u[-1] + 1.0]])
    best_gain = -1.0
    best_value = None
    for c in candidates:
        gain = _split_gain(base + c * xm, y, k, h_parent)
        if gain > best_gain:
            best_gain = gain
            best_value = float(c)
    return best_gain, best_value


def oc1_optimize(
    d,
    node_indices,
    init: StumpParams,
    cfg: Oc1Config,
    rng: np.random.Generator | None = None,
    smoothing: float = 1.0,
) -> StumpParams:
    """Coordinate-descent oblique split with random perturbation restarts.

    Sweeps the weight dimensions, setting each to its gain-maximizing
    critical value with the others held fixed. When a full pass improves
    the gain by less than ``stagnation_eps``, random single-coordinate
    perturbations are tried and kept only if they improve. The returned
    stump never has lower information gain than the initialization.
    """
    node_indices = np.asarray(node_indices, dtype=np.int64)
    x = d.x[node_indices]
    y = d.y[node_indices]
    if len(y) < 2 or np.all(y == y[0]):
        raise NoValidSplit("node is pure or too small")
    if rng is None:
        rng = make_rng(cfg.seed)
    p = d.p
    h_parent = _entropy_from_counts(np.bincount(y, minlength=d.k))

    w = init.w.astype(np.float64).copy()
    z = x @ w
    best_gain = _split_gain(z, y, d.k, h_parent)
    best_w = w.copy()

    for _ in range(cfg.max_passes):
        gain_at_pass_start = best_gain
        for m in range(p):
            base = z - w[m] * x[:, m]
            hit = _best_coord_value(base, x[:, m], y, d.k, h_parent)
            if hit is None:
                continue  # coordinate is zero for every datum
            gain, value = hit
            if gain > best_gain:
                w[m] = value
                z = base + value * x[:, m]
                best_gain = gain
                best_w = w.copy()
        if best_gain - gain_at_pass_start < cfg.stagnation_eps:
            improved = False
            for _ in range(cfg.n_perturbations):
                m = int(rng.integers(p))
                delta = rng.uniform(-1.0, 1.0) * (1.0 + abs(w[m]))
                w_try = w.copy()
                w_try[m] += delta
                z_try = x @ w_try
                gain = _split_gain(z_try, y, d.k, h_parent)
                if gain > best_gain:
                    w, z, best_gain, best_w = w_try, z_try, gain, w_try.copy()
                    improved = True
            if not improved:
                break

    right = x @ best_w >= 0
    k = d.k
    theta0 = init.theta0
    theta1 = init.theta1
    if (~right).any():
        theta0 = optimal_leaf_logloss(np.bincount(y[~right], minlength=k), smoothing)
    if right.any():
        theta1 = optimal_leaf_logloss(np.bincount(y[right], minlength=k), smoothing)
    return StumpParams(w=best_w, theta0=theta0, theta1=theta1)
