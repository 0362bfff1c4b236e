"""Continuously optimized oblique stumps.

The stump's hard 0/1-routed loss is discontinuous in ``w``, so training
minimizes a ramp-style pointwise upper bound instead::

    max(-w@x + l(theta0, y),  w@x + l(theta1, y)) - |w@x|

subject to ``||w||^2 <= nu``. The bound is a difference of convex terms;
each outer round of the convex-concave procedure freezes the sign pattern
of the concave part at the current ``w`` (the anchor) and runs mini-batch
projected subgradient descent with momentum on the resulting convex
subproblem. Larger ``nu`` tightens the bound but makes it less smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .loss import LOG_LOSS, StumpParams, optimal_leaf_logloss, _node_view

# eta decays by lr_decay on stagnation; training stops once it falls
# below eta_initial / ETA_STOP_FACTOR
ETA_STOP_FACTOR = 128.0


class DivergedError(RuntimeError):
    """Surrogate became non-finite; retry with a smaller learning rate."""


@dataclass
class Co2Hyper:
    """Hyperparameters of the stump optimizer.

    ``nu`` bounds ``||w||^2``; ``eta`` is the initial learning rate;
    ``tau`` is the number of epochs per outer round; ``lr_decay`` halves
    eta after ``lr_patience`` rounds without surrogate improvement.
    """

    nu: float = 10.0
    eta: float = 0.01
    tau: int = 5
    batch_size: int = 100
    momentum: float = 0.9
    max_cccp_rounds: int = 20
    rel_tol: float = 1e-4
    lr_decay: float = 0.5
    lr_patience: int = 2
    seed: int = 0
    refit_leaves: bool = True


@dataclass
class CccpTrace:
    """Per-outer-round diagnostics; row 0 is the initialization."""

    surrogate: list = field(default_factory=list)
    empirical: list = field(default_factory=list)
    norm_w: list = field(default_factory=list)
    eta: list = field(default_factory=list)

    def record(self, surrogate, empirical, norm_w, eta):
        self.surrogate.append(float(surrogate))
        self.empirical.append(float(empirical))
        self.norm_w.append(float(norm_w))
        self.eta.append(float(eta))

    def rows(self):
        """(round, surrogate, empirical, norm_w, eta) tuples for CSV dumps."""
        return [
            (r, s, e, n, lr)
            for r, (s, e, n, lr) in enumerate(
                zip(self.surrogate, self.empirical, self.norm_w, self.eta)
            )
        ]


def pointwise_bound(s: StumpParams, x: np.ndarray, y: int, per_leaf_loss=LOG_LOSS) -> float:
    """Upper bound on one example's routed leaf loss; tight for most inputs."""
    z = float(s.w @ x)
    l0 = per_leaf_loss.value(s.theta0, y)
    l1 = per_leaf_loss.value(s.theta1, y)
    return max(-z + l0, z + l1) - abs(z)


def surrogate_loss(s: StumpParams, d, per_leaf_loss=LOG_LOSS, indices=None) -> float:
    """Summed pointwise bound over a dataset; always >= the empirical loss."""
    x, y = _node_view(d, indices)
    return _surrogate_xy(s.w, s.theta0, s.theta1, x, y, per_leaf_loss)


def _surrogate_xy(w, theta0, theta1, x, y, loss) -> float:
    if len(y) == 0:
        return 0.0
    z = x @ w
    l0 = loss.values(theta0, y)
    l1 = loss.values(theta1, y)
    return float(np.sum(np.maximum(-z + l0, z + l1) - np.abs(z)))


def _empirical_xy(w, theta0, theta1, x, y, loss) -> float:
    if len(y) == 0:
        return 0.0
    right = x @ w >= 0
    return float(loss.values(theta0, y[~right]).sum() + loss.values(theta1, y[right]).sum())


def project_ball(w: np.ndarray, nu: float) -> np.ndarray:
    """Project onto {w : ||w||^2 <= nu}; the boundary is feasible."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    nsq = float(w @ w)
    if nsq <= nu:
        return w
    return w * math.sqrt(nu / nsq)


def cccp_subgradient(
    s: StumpParams,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    w_anchor: np.ndarray,
    per_leaf_loss=LOG_LOSS,
):
    """Batch-averaged subgradient of the anchored convex subproblem.

    Per example, with ``sz = sign(w_anchor @ x)`` (sign(0) = +1): if the
    left arm of the max is active (ties included), the example contributes
    ``-(1 + sz) x`` to the ``w`` gradient and its leaf-loss gradient to
    ``theta0``; otherwise ``(1 - sz) x`` and ``theta1``.
    """
    z = x_batch @ s.w
    l0 = per_leaf_loss.values(s.theta0, y_batch)
    l1 = per_leaf_loss.values(s.theta1, y_batch)
    sz = np.where(x_batch @ w_anchor >= 0, 1.0, -1.0)
    arm0 = (-z + l0) >= (z + l1)
    coef = np.where(arm0, -(1.0 + sz), 1.0 - sz)
    b = len(y_batch)
    g_w = (x_batch.T @ coef) / b
    g_theta0 = per_leaf_loss.grad_sum(s.theta0, y_batch[arm0]) / b
    g_theta1 = per_leaf_loss.grad_sum(s.theta1, y_batch[~arm0]) / b
    return g_w, g_theta0, g_theta1


def cccp_subproblem_loss(
    s: StumpParams,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    w_anchor: np.ndarray,
    per_leaf_loss=LOG_LOSS,
) -> float:
    """Anchored convex subproblem objective, averaged to match the gradient."""
    z = x_batch @ s.w
    l0 = per_leaf_loss.values(s.theta0, y_batch)
    l1 = per_leaf_loss.values(s.theta1, y_batch)
    sz = np.where(x_batch @ w_anchor >= 0, 1.0, -1.0)
    return float(np.mean(np.maximum(-z + l0, z + l1) - sz * z))


def cccp_optimize(
    d,
    init: StumpParams,
    h: Co2Hyper,
    per_leaf_loss=LOG_LOSS,
    indices=None,
    rng: np.random.Generator | None = None,
    refit_smoothing: float = 1.0,
) -> tuple[StumpParams, CccpTrace]:
    """Train one oblique stump by CCCP with projected mini-batch descent.

    Each outer round anchors the concave term at the current ``w`` and
    runs ``h.tau`` epochs of mini-batch subgradient descent with momentum,
    projecting ``w`` back onto the nu-ball after every step. Rounds stop on
    relative surrogate change below ``h.rel_tol``, after
    ``h.max_cccp_rounds``, or once eta has decayed below its floor.

    Returns the parameters with the best observed surrogate. Afterwards,
    if ``h.refit_leaves``, the leaves are re-fit in closed form on the
    final hard partition; and if the result's empirical loss exceeds the
    initialization's, the initialization is returned instead, so a trained
    stump never underperforms its seed on the training data.

    Raises DivergedError if the surrogate becomes non-finite (learning
    rate too large for the data scale).
    """
    x, y = _node_view(d, indices)
    n = len(y)
    if n == 0:
        raise ValueError("cannot optimize a stump on an empty dataset")
    if rng is None:
        rng = make_rng(h.seed)

    init = StumpParams(project_ball(init.w.astype(np.float64), h.nu), init.theta0, init.theta1)
    w = init.w.copy()
    theta0 = init.theta0.astype(np.float64).copy()
    theta1 = init.theta1.astype(np.float64).copy()

    eta = h.eta
    eta_floor = h.eta / ETA_STOP_FACTOR
    trace = CccpTrace()

    def evaluate(wv, t0, t1):
        return (
            _surrogate_xy(wv, t0, t1, x, y, per_leaf_loss),
            _empirical_xy(wv, t0, t1, x, y, per_leaf_loss),
        )

    surr, emp = evaluate(w, theta0, theta1)
    trace.record(surr, emp, np.linalg.norm(w), eta)
    best = (surr, w.copy(), theta0.copy(), theta1.copy())
    stall = 0

    for _ in range(h.max_cccp_rounds):
        w_anchor = w.copy()
        v_w = np.zeros_like(w)
        v_t0 = np.zeros_like(theta0)
        v_t1 = np.zeros_like(theta1)
        for _epoch in range(h.tau):
            order = rng.permutation(n)
            for start in range(0, n, h.batch_size):
                batch = order[start : start + h.batch_size]
                g_w, g_t0, g_t1 = cccp_subgradient(
                    StumpParams(w, theta0, theta1), x[batch], y[batch], w_anchor, per_leaf_loss
                )
                v_w = h.momentum * v_w - eta * g_w
                w = project_ball(w + v_w, h.nu)
                v_t0 = h.momentum * v_t0 - eta * g_t0
                theta0 = theta0 + v_t0
                v_t1 = h.momentum * v_t1 - eta * g_t1
                theta1 = theta1 + v_t1

        prev = trace.surrogate[-1]
        surr, emp = evaluate(w, theta0, theta1)
        if not math.isfinite(surr):
            raise DivergedError("surrogate is non-finite; reduce the learning rate")
        trace.record(surr, emp, np.linalg.norm(w), eta)

        if surr < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (surr, w.copy(), theta0.copy(), theta1.copy())
            stall = 0
        else:
            stall += 1
        if abs(prev - surr) <= h.rel_tol * max(1.0, abs(prev)):
            break
        if stall >= h.lr_patience:
            eta *= h.lr_decay
            stall = 0
            if eta < eta_floor:
                break

    result = StumpParams(best[1], best[2], best[3])
    if h.refit_leaves:
        result = _refit_leaves(result, x, y, refit_smoothing)
    final_emp = _empirical_xy(result.w, result.theta0, result.theta1, x, y, per_leaf_loss)
    init_emp = _empirical_xy(init.w, init.theta0, init.theta1, x, y, per_leaf_loss)
    if final_emp > init_emp + 1e-12 * max(1.0, init_emp):
        return init.copy(), trace
    return result, trace


def _refit_leaves(s: StumpParams, x, y, smoothing) -> StumpParams:
    """Closed-form leaf refit on the final hard partition; empty sides keep
    their gradient-trained parameters."""
    k = s.theta0.shape[0]
    right = x @ s.w >= 0
    theta0, theta1 = s.theta0, s.theta1
    if (~right).any():
        theta0 = optimal_leaf_logloss(np.bincount(y[~right], minlength=k), smoothing)
    if right.any():
        theta1 = optimal_leaf_logloss(np.bincount(y[right], minlength=k), smoothing)
    return StumpParams(s.w, theta0, theta1)
