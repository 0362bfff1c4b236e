"""Greedy breadth-first induction of a single decision tree.

Trees are grown one stump at a time from the root down. The stump trainer
is pluggable: plain axis-aligned splits, oblique splits continuously
optimized from an axis-aligned seed, or OC1-style coordinate descent.
Nodes are stored in breadth-first order, so children always have larger
ids than their parent and a lone leaf is the whole tree at depth 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .loss import LOG_LOSS, optimal_leaf_logloss, softmax_prob
from .stump_baselines import (
    NoValidSplit,
    Oc1Config,
    axis_split_to_stump,
    best_axis_aligned_split,
    oc1_optimize,
)
from .stump_co2 import Co2Hyper, DivergedError, cccp_optimize, project_ball

_NODE_SALT = 7


@dataclass
class LeafNode:
    theta: np.ndarray
    counts: np.ndarray | None = None


@dataclass
class InternalNode:
    w: np.ndarray
    left: int
    right: int
    counts: np.ndarray | None = None


@dataclass
class Tree:
    """Binary tree over augmented inputs; node 0 is the root.

    ``traces`` maps internal node id to the CCCP trace recorded while that
    node's stump was trained; populated only when the grow config asks for
    it, and never serialized.
    """

    nodes: list
    depth: int
    k: int
    p: int
    traces: dict | None = None

    @property
    def n_leaves(self) -> int:
        return sum(isinstance(n, LeafNode) for n in self.nodes)

    @property
    def n_internal(self) -> int:
        return sum(isinstance(n, InternalNode) for n in self.nodes)


@dataclass
class GrowConfig:
    """Tree induction settings shared by all stump trainers.

    ``max_depth`` of None grows until every leaf is pure (or no split is
    possible); ``q`` is the number of candidate features for axis-aligned
    search and for seeding the oblique trainers, defaulting to
    round(sqrt(p_raw)). The same co2 hyperparameters apply at every node.
    """

    stump_trainer: str = "co2"
    max_depth: int | None = None
    min_samples_split: int = 2
    q: int | None = None
    leaf_smoothing: float = 1.0
    co2: Co2Hyper = field(default_factory=Co2Hyper)
    oc1: Oc1Config = field(default_factory=Oc1Config)
    seed: int = 0
    collect_traces: bool = False


def _train_stump(d, indices, cfg: GrowConfig, rng, q: int):
    """Train one stump at a node; may raise NoValidSplit."""
    split, _ = best_axis_aligned_split(d, indices, q, rng)
    init = axis_split_to_stump(split, d, indices, cfg.leaf_smoothing)
    if cfg.stump_trainer == "axis":
        return init, None
    if cfg.stump_trainer == "oc1":
        return oc1_optimize(d, indices, init, cfg.oc1, rng=rng, smoothing=cfg.leaf_smoothing), None
    init.w = project_ball(init.w, cfg.co2.nu)
    try:
        stump, trace = cccp_optimize(
            d, init, cfg.co2, LOG_LOSS, indices=indices, rng=rng,
            refit_smoothing=cfg.leaf_smoothing,
        )
    except DivergedError:
        return init, None
    return stump, trace


def grow_tree(d, sample_indices, cfg: GrowConfig, seed_key=None) -> Tree:
    """Induce a tree breadth first over the given sample of a Dataset.

    A node becomes a leaf when it is pure, smaller than
    ``min_samples_split``, at ``max_depth``, or when no valid split exists
    (including trained stumps that send every example one way, for which
    the oblique trainers first fall back to their axis-aligned seed).
    Randomness comes from per-node streams keyed by (seed, node id), so
    the result is independent of any outer parallelism.
    """
    if cfg.stump_trainer not in ("co2", "axis", "oc1"):
        raise ValueError(f"unknown stump trainer {cfg.stump_trainer!r}")
    indices = np.asarray(sample_indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot grow a tree from an empty sample")
    if seed_key is None:
        seed_key = (cfg.seed,)
    elif isinstance(seed_key, int):
        seed_key = (seed_key,)
    p_raw = d.p - 1
    q = cfg.q if cfg.q is not None else max(1, round(p_raw**0.5))

    nodes = {}
    traces = {} if cfg.collect_traces else None
    next_id = 1
    max_leaf_depth = 0
    queue = deque([(0, indices, 0)])
    while queue:
        node_id, node_idx, depth = queue.popleft()
        y_node = d.y[node_idx]
        counts = np.bincount(y_node, minlength=d.k)
        stump = None
        if (
            counts.max() < len(y_node)
            and len(y_node) >= cfg.min_samples_split
            and (cfg.max_depth is None or depth < cfg.max_depth)
        ):
            rng = make_rng(*seed_key, _NODE_SALT, node_id)
            try:
                stump, trace = _train_stump(d, node_idx, cfg, rng, q)
            except NoValidSplit:
                stump = None
            else:
                right = d.x[node_idx] @ stump.w >= 0
                if right.all() or not right.any():
                    # one-sided oblique result: retry with the plain axis split
                    if cfg.stump_trainer != "axis":
                        axis_rng = make_rng(*seed_key, _NODE_SALT, node_id)
                        split, _ = best_axis_aligned_split(d, node_idx, q, axis_rng)
                        stump = axis_split_to_stump(split, d, node_idx, cfg.leaf_smoothing)
                        trace = None
                        right = d.x[node_idx] @ stump.w >= 0
                    if right.all() or not right.any():
                        stump = None
        if stump is None:
            nodes[node_id] = LeafNode(
                theta=optimal_leaf_logloss(counts, cfg.leaf_smoothing), counts=counts
            )
            max_leaf_depth = max(max_leaf_depth, depth)
            continue
        left_id, right_id = next_id, next_id + 1
        next_id += 2
        nodes[node_id] = InternalNode(w=stump.w, left=left_id, right=right_id, counts=counts)
        if traces is not None and trace is not None:
            traces[node_id] = trace
        queue.append((left_id, node_idx[~right], depth + 1))
        queue.append((right_id, node_idx[right], depth + 1))

    return Tree(
        nodes=[nodes[i] for i in range(len(nodes))],
        depth=max_leaf_depth,
        k=d.k,
        p=d.p,
        traces=traces,
    )


def tree_predict_proba(t: Tree, x: np.ndarray) -> np.ndarray:
    """Class distribution of the leaf reached by one augmented input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (t.p,):
        raise ValueError(f"expected an augmented input of length {t.p}, got {x.shape}")
    node = t.nodes[0]
    while isinstance(node, InternalNode):
        node = t.nodes[node.right] if node.w @ x >= 0 else t.nodes[node.left]
    return softmax_prob(node.theta)


def tree_predict_proba_batch(
    t: Tree, x: np.ndarray, depth_limit: int | None = None, smoothing: float = 1.0
) -> np.ndarray:
    """Vectorized routing of many rows at once.

    With ``depth_limit`` set, internal nodes at that depth act as leaves
    using their stored training label counts, which reproduces the tree as
    it looked when grown to that depth.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != t.p:
        raise ValueError(f"expected (n, {t.p}) augmented inputs, got {x.shape}")
    out = np.empty((x.shape[0], t.k))
    stack = [(0, np.arange(x.shape[0]), 0)]
    while stack:
        node_id, rows, depth = stack.pop()
        if rows.size == 0:
            continue
        node = t.nodes[node_id]
        truncated = (
            depth_limit is not None and depth >= depth_limit and isinstance(node, InternalNode)
        )
        if isinstance(node, LeafNode) or truncated:
            theta = node.theta if not truncated else optimal_leaf_logloss(node.counts, smoothing)
            out[rows] = softmax_prob(theta)
            continue
        right = x[rows] @ node.w >= 0
        stack.append((node.left, rows[~right], depth + 1))
        stack.append((node.right, rows[right], depth + 1))
    return out


def tree_training_error(t: Tree, d, indices=None) -> float:
    """Fraction of argmax-misclassified examples (ties pick the lowest class)."""
    if indices is None:
        x, y = d.x, d.y
    else:
        indices = np.asarray(indices, dtype=np.int64)
        x, y = d.x[indices], d.y[indices]
    if len(y) == 0:
        raise ValueError("no examples to evaluate")
    pred = tree_predict_proba_batch(t, x).argmax(axis=1)
    return float((pred != y).mean())
