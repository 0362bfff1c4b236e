import math

import numpy as np
import pytest
from scipy.optimize import minimize

from co2forest._rng import make_rng
from co2forest.loss import (
    LOG_LOSS,
    SQUARED_LOSS,
    StumpParams,
    information_gain,
    log_loss,
    log_loss_grad,
    optimal_leaf_logloss,
    softmax_prob,
    squared_loss,
    squared_loss_grad,
    stump_empirical_loss,
)

from _synth import as_dataset


def test_softmax_symmetry_and_shift():
    assert np.allclose(softmax_prob([0.0, 0.0]), [0.5, 0.5])
    for c in (-3.0, 0.0, 12.5):
        assert np.allclose(softmax_prob([c] * 4), [0.25] * 4)


def test_softmax_stability():
    p = softmax_prob([1000.0, 0.0])
    assert np.isfinite(p).all()
    assert p[0] > 1 - 1e-12 and p[1] < 1e-12
    assert abs(p.sum() - 1.0) < 1e-12


def test_log_loss_uniform():
    for y in range(4):
        assert log_loss(np.zeros(4), y) == pytest.approx(math.log(4), abs=1e-12)


def test_log_loss_confident():
    # closed form: log(1 + exp(-10))
    assert log_loss(np.array([10.0, 0.0]), 0) == pytest.approx(4.5398899216870535e-05, rel=1e-12)


def test_log_loss_gradient_uniform():
    assert np.allclose(log_loss_grad(np.zeros(2), 0), [-0.5, 0.5])


def test_log_loss_rejects_bad_class():
    with pytest.raises(ValueError):
        log_loss(np.zeros(3), 3)
    with pytest.raises(ValueError):
        log_loss(np.zeros(3), -1)


def test_log_loss_matches_softmax():
    rng = make_rng(21)
    for _ in range(50):
        k = int(rng.integers(2, 6))
        theta = rng.normal(size=k) * 3
        y = int(rng.integers(k))
        assert log_loss(theta, y) >= 0
        assert log_loss(theta, y) == pytest.approx(-math.log(softmax_prob(theta)[y]), abs=1e-10)


def _central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (f(x + step) - f(x - step)) / (2 * h)
    return g


def test_gradients_match_finite_differences():
    rng = make_rng(22)
    for _ in range(100):
        k = int(rng.integers(2, 6))
        theta = rng.normal(size=k) * 2
        y = int(rng.integers(k))
        y_vec = rng.normal(size=k)
        fd_log = _central_diff(lambda t: log_loss(t, y), theta)
        fd_sqr = _central_diff(lambda t: squared_loss(t, y_vec), theta)
        assert np.allclose(log_loss_grad(theta, y), fd_log, rtol=1e-5, atol=1e-7)
        assert np.allclose(squared_loss_grad(theta, y_vec), fd_sqr, rtol=1e-5, atol=1e-7)


def test_squared_loss_cases():
    assert squared_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert squared_loss(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == 1.0
    assert np.allclose(squared_loss_grad(np.array([1.0, 0.0]), np.zeros(2)), [2.0, 0.0])
    assert squared_loss(np.array([1.0, 2.0]), np.array([3.0, 1.0])) == 5.0
    with pytest.raises(ValueError):
        squared_loss(np.zeros(2), np.zeros(3))


def test_batch_loss_plugs_match_scalar_forms():
    rng = make_rng(23)
    for plug in (LOG_LOSS, SQUARED_LOSS):
        k = 4
        theta = rng.normal(size=k)
        y = rng.integers(0, k, size=30)
        vals = plug.values(theta, y)
        assert np.allclose(vals, [plug.value(theta, yi) for yi in y])
        gsum = plug.grad_sum(theta, y)
        assert np.allclose(gsum, np.sum([plug.grad(theta, yi) for yi in y], axis=0))
        assert np.allclose(plug.grad_sum(theta, y[:0]), np.zeros(k))


def test_optimal_leaf_matches_numeric_minimizer():
    # oracle: minimize 3*l(theta, 0) + 1*l(theta, 1) numerically
    def objective(theta):
        return 3 * log_loss(theta, 0) + 1 * log_loss(theta, 1)

    res = minimize(objective, np.zeros(2), method="Nelder-Mead", options={"xatol": 1e-10})
    oracle_probs = softmax_prob(res.x)
    probs = softmax_prob(optimal_leaf_logloss(np.array([3, 1]), smoothing=0.0))
    assert np.allclose(probs, oracle_probs, atol=1e-6)
    assert np.allclose(probs, [0.75, 0.25], atol=1e-12)


def test_optimal_leaf_smoothing():
    probs = softmax_prob(optimal_leaf_logloss(np.array([5, 0]), smoothing=1.0))
    assert np.allclose(probs, [6 / 7, 1 / 7])
    for eps in (0.0, 0.5, 2.0):
        assert np.allclose(
            softmax_prob(optimal_leaf_logloss(np.array([2, 2]), smoothing=eps)), [0.5, 0.5]
        )
    with pytest.raises(ValueError):
        optimal_leaf_logloss(np.array([0, 0]), smoothing=0.0)


def test_stump_empirical_loss_routing():
    d = as_dataset(np.array([[1.0], [-1.0]]), [0, 1])
    s = StumpParams(
        w=np.array([1.0, 0.0]), theta0=np.array([0.0, 1.0]), theta1=np.array([2.0, 0.0])
    )
    # row 0 routes right, row 1 left
    expected = log_loss(s.theta1, 0) + log_loss(s.theta0, 1)
    assert stump_empirical_loss(s, d) == pytest.approx(expected, abs=1e-12)
    assert stump_empirical_loss(s, d, indices=np.array([], dtype=int)) == 0.0


def test_stump_loss_boundary_routes_right():
    d = as_dataset(np.array([[0.0]]), [0], k=2)
    s = StumpParams(w=np.array([1.0, 0.0]), theta0=np.zeros(2), theta1=np.array([5.0, 0.0]))
    assert stump_empirical_loss(s, d) == pytest.approx(log_loss(s.theta1, 0), abs=1e-12)


def test_stump_loss_scale_invariant():
    rng = make_rng(24)
    d = as_dataset(rng.normal(size=(25, 3)), rng.integers(0, 3, size=25))
    s = StumpParams(w=rng.normal(size=4), theta0=rng.normal(size=3), theta1=rng.normal(size=3))
    base = stump_empirical_loss(s, d)
    for a in (0.5, 2.0, 117.0):
        scaled = StumpParams(w=a * s.w, theta0=s.theta0, theta1=s.theta1)
        assert stump_empirical_loss(scaled, d) == base


def test_information_gain_cases():
    assert information_gain([0, 0], [1, 1]) == pytest.approx(math.log(2), abs=1e-12)
    assert information_gain([0], [0, 0]) == pytest.approx(0.0, abs=1e-12)
    assert information_gain([0, 1], [0, 1]) == pytest.approx(0.0, abs=1e-12)


def test_information_gain_empty_side():
    assert information_gain([], [0, 1]) == pytest.approx(0.0, abs=1e-12)


def _all_axis_splits(d):
    """Every (feature, midpoint threshold) pair of a dense dataset."""
    for f in range(d.p_raw):
        vs = np.unique(d.x[:, f])
        for lo, hi in zip(vs[:-1], vs[1:]):
            yield f, (lo + hi) / 2.0


def test_logloss_minimizer_equals_ig_maximizer():
    # splits minimizing summed log loss with exact leaves are exactly the
    # splits maximizing information gain
    rng = make_rng(25)
    from _synth import random_labeled_dataset
    from co2forest.stump_baselines import AxisSplit, axis_split_to_stump

    for _ in range(10):
        d = random_labeled_dataset(rng)
        gains, losses, keys = [], [], []
        for f, thr in _all_axis_splits(d):
            right = d.x[:, f] - thr >= 0
            gains.append(information_gain(d.y[~right], d.y[right]))
            stump = axis_split_to_stump(AxisSplit(f, thr), d, np.arange(d.n), smoothing=0.0)
            losses.append(stump_empirical_loss(stump, d))
            keys.append((f, thr))
        if not keys:
            continue
        gains = np.asarray(gains)
        losses = np.asarray(losses)
        argmax_ig = {k for k, g in zip(keys, gains) if g >= gains.max() - 1e-9}
        argmin_loss = {k for k, l in zip(keys, losses) if l <= losses.min() + 1e-9}
        assert argmax_ig == argmin_loss
