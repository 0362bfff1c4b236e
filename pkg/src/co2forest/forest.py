"""Bagged tree ensembles and two-stage (q, then nu/eta) validation.

Each tree is trained on its own bootstrap resample, with all randomness
derived from (forest seed, tree index), so training is embarrassingly
parallel and the result does not depend on the degree of parallelism.
Prediction averages the trees' class probabilities; when per-class
weights are set (from rebalanced training), the averaged probabilities
are reweighted and renormalized before the argmax.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import make_rng
from .dataset import Dataset, PreprocessStats, bootstrap_sample, subset, transform_raw
from .tree import GrowConfig, Tree, grow_tree, tree_predict_proba_batch

_BOOT_SALT = 11
_TREE_SALT = 13
_HOLDOUT_SALT = 17


@dataclass
class Forest:
    """A bag of trees plus everything needed to score raw inputs."""

    trees: list
    k: int
    p: int
    label_map: list
    preprocess: PreprocessStats | None = None
    class_weights: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    @property
    def p_raw(self) -> int:
        return self.p - 1


@dataclass
class GridSpec:
    """Hyperparameter candidates: nu/eta pairs and exponents e with q = p^e."""

    nu_set: tuple = (0.1, 1.0, 4.0, 10.0, 43.0, 100.0)
    eta_set: tuple = (0.03, 0.01, 0.003)
    q_exponents: tuple = (0.5, 0.6, 0.7, 0.8, 0.9)
    validation_trees: int = 30


@dataclass
class GridSearchResult:
    best_nu: float
    best_eta: float
    best_q: int
    rows: list  # (nu, eta, q, val_error_percent) for every grid entry
    q_rows: list  # (q, val_error_percent) from the axis-aligned stage


def _config_snapshot(cfg: GrowConfig, n_trees: int, seed: int) -> dict:
    snap = {
        "n_trees": n_trees,
        "seed": seed,
        "trainer": cfg.stump_trainer,
        "max_depth": cfg.max_depth,
        "min_samples_split": cfg.min_samples_split,
        "q": cfg.q,
        "leaf_smoothing": cfg.leaf_smoothing,
    }
    if cfg.stump_trainer == "co2":
        c = cfg.co2
        snap["co2"] = {
            "nu": c.nu, "eta": c.eta, "tau": c.tau, "batch_size": c.batch_size,
            "momentum": c.momentum, "max_cccp_rounds": c.max_cccp_rounds,
            "rel_tol": c.rel_tol, "lr_decay": c.lr_decay, "lr_patience": c.lr_patience,
            "refit_leaves": c.refit_leaves,
        }
    if cfg.stump_trainer == "oc1":
        o = cfg.oc1
        snap["oc1"] = {
            "max_passes": o.max_passes, "n_perturbations": o.n_perturbations,
            "stagnation_eps": o.stagnation_eps,
        }
    return snap


def train_forest(
    d: Dataset,
    n_trees: int,
    cfg: GrowConfig,
    seed: int = 0,
    n_jobs: int = 1,
    preprocess: PreprocessStats | None = None,
    class_weights: np.ndarray | None = None,
) -> Forest:
    """Train ``n_trees`` bagged trees over an already-preprocessed Dataset.

    ``preprocess`` and ``class_weights`` are carried on the model so that
    prediction can start from raw feature rows; they are not applied here.
    """
    if n_trees < 1:
        raise ValueError("a forest needs at least one tree")
    if seed < 0:
        raise ValueError("seed must be non-negative")

    def build(t: int) -> Tree:
        boot = bootstrap_sample(d.n, make_rng(seed, _BOOT_SALT, t))
        return grow_tree(d, boot, cfg, seed_key=(seed, _TREE_SALT, t))

    if n_jobs == 1:
        trees = [build(t) for t in range(n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(n_trees)))
    return Forest(
        trees=trees,
        k=d.k,
        p=d.p,
        label_map=list(d.label_map),
        preprocess=preprocess,
        class_weights=None if class_weights is None else np.asarray(class_weights, float),
        config=_config_snapshot(cfg, n_trees, seed),
    )


def prepare_inputs(f: Forest, x_raw: np.ndarray) -> np.ndarray:
    """Raw feature rows -> preprocessed rows with the homogeneous -1 column."""
    x_raw = np.atleast_2d(np.asarray(x_raw, dtype=np.float64))
    if x_raw.shape[1] != f.p_raw:
        raise ValueError(f"dimension mismatch: {x_raw.shape[1]} features, model has {f.p_raw}")
    if f.preprocess is not None:
        x_raw = transform_raw(x_raw, f.preprocess)
    out = np.empty((x_raw.shape[0], f.p))
    out[:, :-1] = x_raw
    out[:, -1] = -1.0
    return out


def _reweight(f: Forest, proba: np.ndarray) -> np.ndarray:
    if f.class_weights is None:
        return proba
    proba = proba * f.class_weights
    return proba / proba.sum(axis=1, keepdims=True)


def forest_predict_proba_batch(f: Forest, x_raw: np.ndarray) -> np.ndarray:
    x = prepare_inputs(f, x_raw)
    acc = np.zeros((x.shape[0], f.k))
    for tree in f.trees:
        acc += tree_predict_proba_batch(tree, x)
    return _reweight(f, acc / len(f.trees))


def forest_predict_proba(f: Forest, x_raw: np.ndarray) -> np.ndarray:
    return forest_predict_proba_batch(f, np.atleast_2d(x_raw))[0]


def forest_predict_batch(f: Forest, x_raw: np.ndarray) -> np.ndarray:
    """Predicted class indices; probability ties pick the lowest class."""
    return forest_predict_proba_batch(f, x_raw).argmax(axis=1)


def forest_predict(f: Forest, x_raw: np.ndarray) -> int:
    return int(forest_predict_proba(f, x_raw).argmax())


def forest_error_percent(f: Forest, x_raw: np.ndarray, y: np.ndarray) -> float:
    return 100.0 * float((forest_predict_batch(f, x_raw) != y).mean())


def prefix_error_curve(f: Forest, x_raw: np.ndarray, y: np.ndarray) -> list:
    """(m, error_percent) using only the first m trees, for m = 1..n_trees."""
    x = prepare_inputs(f, x_raw)
    acc = np.zeros((x.shape[0], f.k))
    curve = []
    for m, tree in enumerate(f.trees, start=1):
        acc += tree_predict_proba_batch(tree, x)
        pred = _reweight(f, acc / m).argmax(axis=1)
        curve.append((m, 100.0 * float((pred != y).mean())))
    return curve


def depth_error_curve(
    f: Forest, x_raw: np.ndarray, y: np.ndarray, smoothing: float = 1.0
) -> list:
    """(depth, error_percent) with every tree truncated to that depth."""
    x = prepare_inputs(f, x_raw)
    curve = []
    for depth in range(max(t.depth for t in f.trees) + 1):
        acc = np.zeros((x.shape[0], f.k))
        for tree in f.trees:
            acc += tree_predict_proba_batch(tree, x, depth_limit=depth, smoothing=smoothing)
        pred = _reweight(f, acc / len(f.trees)).argmax(axis=1)
        curve.append((depth, 100.0 * float((pred != y).mean())))
    return curve


def holdout_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train_indices, val_indices) split of range(n)."""
    if not 0 < fraction < 1:
        raise ValueError("holdout fraction must be in (0, 1)")
    order = make_rng(seed, _HOLDOUT_SALT).permutation(n)
    n_val = max(1, int(round(fraction * n)))
    if n_val >= n:
        raise ValueError("holdout split leaves no training data")
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _q_from_exponent(p_raw: int, exponent: float) -> int:
    return max(1, min(p_raw, round(p_raw**exponent)))


def grid_search(
    train: Dataset,
    val: Dataset | None,
    grid: GridSpec,
    cfg: GrowConfig,
    seed: int = 0,
    n_jobs: int = 1,
    val_fraction: float = 0.2,
) -> GridSearchResult:
    """Two-stage hyperparameter selection on a holdout set.

    Stage 1 picks q by validating axis-aligned forests over the q
    candidates; stage 2 trains one oblique forest per (nu, eta) pair at
    that q and keeps the lowest validation error, breaking ties toward
    the smaller nu, then the smaller eta. When ``val`` is None, a
    ``val_fraction`` holdout is carved out of ``train``.
    """
    if not (grid.nu_set and grid.eta_set and grid.q_exponents):
        raise ValueError("empty hyperparameter grid")
    if val is None:
        train_idx, val_idx = holdout_split(train.n, val_fraction, seed)
        val = subset(train, val_idx)
        train = subset(train, train_idx)
    val_x_raw = val.x[:, :-1]

    qs = sorted({_q_from_exponent(train.p_raw, e) for e in grid.q_exponents})
    q_rows = []
    best_q, best_q_err = None, None
    for q in qs:
        rf_cfg = replace(cfg, stump_trainer="axis", q=q)
        rf = train_forest(train, grid.validation_trees, rf_cfg, seed=seed, n_jobs=n_jobs)
        err = forest_error_percent(rf, val_x_raw, val.y)
        q_rows.append((q, err))
        if best_q is None or err < best_q_err:
            best_q, best_q_err = q, err

    rows = []
    best = None
    for nu in grid.nu_set:
        for eta in grid.eta_set:
            co2_cfg = replace(
                cfg, stump_trainer="co2", q=best_q, co2=replace(cfg.co2, nu=nu, eta=eta)
            )
            model = train_forest(train, grid.validation_trees, co2_cfg, seed=seed, n_jobs=n_jobs)
            err = forest_error_percent(model, val_x_raw, val.y)
            rows.append((nu, eta, best_q, err))
            if best is None or err < best[0]:
                best = (err, nu, eta)

    return GridSearchResult(
        best_nu=best[1], best_eta=best[2], best_q=best_q, rows=rows, q_rows=q_rows
    )
