import numpy as np
import pytest

from co2forest._rng import make_rng
from co2forest.dataset import Dataset
from co2forest.loss import LOG_LOSS, SQUARED_LOSS, StumpParams, log_loss, stump_empirical_loss
from co2forest.stump_co2 import (
    Co2Hyper,
    DivergedError,
    cccp_optimize,
    cccp_subgradient,
    cccp_subproblem_loss,
    pointwise_bound,
    project_ball,
    surrogate_loss,
)

from _synth import as_dataset


def _pointwise_empirical(s, x, y, loss):
    z = float(s.w @ x)
    return loss.value(s.theta1 if z >= 0 else s.theta0, y)


def test_bound_at_zero_projection():
    # w orthogonal to x: the |w@x| term vanishes
    s = StumpParams(
        w=np.array([1.0, -1.0, 0.0]), theta0=np.array([3.0, 0.0]), theta1=np.array([0.0, 0.0])
    )
    x = np.array([1.0, 1.0, -1.0])
    expected = max(log_loss(s.theta0, 0), log_loss(s.theta1, 0))
    assert pointwise_bound(s, x, 0) == pytest.approx(expected, abs=1e-12)


def test_bound_tight_on_left_arm():
    # z = -3 with leaf losses 1 and 0: max(3+1, -3+0) - 3 = 1, the true loss
    s = StumpParams(
        w=np.array([1.0, 0.0, 0.0]),
        theta0=np.array([0.0, 0.0]),  # squared loss vs onehot(0) = 1
        theta1=np.array([1.0, 0.0]),  # squared loss vs onehot(0) = 0
    )
    x = np.array([-3.0, 2.0, -1.0])
    assert pointwise_bound(s, x, 0, SQUARED_LOSS) == pytest.approx(1.0, abs=1e-12)
    assert _pointwise_empirical(s, x, 0, SQUARED_LOSS) == pytest.approx(1.0, abs=1e-12)


def test_bound_tight_on_right_arm():
    # z = 1 with leaf losses 0 and 5: max(-1, 6) - 1 = 5
    s = StumpParams(
        w=np.array([1.0, 0.0, 0.0]),
        theta0=np.array([1.0, 0.0]),
        theta1=np.array([3.0, 1.0]),  # (3-1)^2 + 1 = 5
    )
    x = np.array([1.0, 0.0, -1.0])
    assert pointwise_bound(s, x, 0, SQUARED_LOSS) == pytest.approx(5.0, abs=1e-12)


def test_bound_dominates_empirical():
    rng = make_rng(31)
    for _ in range(2000):
        k = int(rng.integers(2, 6))
        p = int(rng.integers(2, 11))
        s = StumpParams(
            w=rng.normal(size=p) * rng.uniform(0.1, 10),
            theta0=rng.normal(size=k) * 2,
            theta1=rng.normal(size=k) * 2,
        )
        x = rng.normal(size=p)
        y = int(rng.integers(k))
        assert pointwise_bound(s, x, y) >= _pointwise_empirical(s, x, y, LOG_LOSS) - 1e-12


def test_bound_tightens_with_scale():
    rng = make_rng(32)
    scales = (1.0, 2.0, 10.0, 100.0)
    for _ in range(500):
        k = int(rng.integers(2, 5))
        p = int(rng.integers(2, 8))
        w = rng.normal(size=p)
        t0, t1 = rng.normal(size=k), rng.normal(size=k)
        x = rng.normal(size=p)
        y = int(rng.integers(k))
        bounds = [
            pointwise_bound(StumpParams(a * w, t0, t1), x, y) for a in scales
        ]
        assert bounds[0] == pointwise_bound(StumpParams(w, t0, t1), x, y)  # a=1 is identity
        for lo, hi in zip(bounds[1:], bounds[:-1]):
            assert lo <= hi + 1e-12


def test_project_ball():
    w = np.array([3.0, 4.0])
    assert np.array_equal(project_ball(w, 25.0), w)  # boundary is feasible
    assert np.allclose(project_ball(w, 1.0), [0.6, 0.8])
    assert abs(project_ball(w, 1.0) @ project_ball(w, 1.0) - 1.0) < 1e-12
    assert np.array_equal(project_ball(np.zeros(3), 0.5), np.zeros(3))
    with pytest.raises(ValueError):
        project_ball(w, 0.0)


def test_surrogate_loss_cases():
    d = as_dataset(np.array([[2.0]]), [0], k=2)
    s = StumpParams(w=np.zeros(2), theta0=np.array([1.0, 0.0]), theta1=np.array([0.0, 1.0]))
    expected = max(log_loss(s.theta0, 0), log_loss(s.theta1, 0))
    assert surrogate_loss(s, d) == pytest.approx(expected, abs=1e-12)
    assert surrogate_loss(s, d, indices=np.array([], dtype=int)) == 0.0


def test_surrogate_dominates_empirical_loss():
    rng = make_rng(33)
    for _ in range(20):
        d = as_dataset(rng.normal(size=(50, 4)), rng.integers(0, 3, size=50))
        s = StumpParams(
            w=rng.normal(size=5), theta0=rng.normal(size=3), theta1=rng.normal(size=3)
        )
        assert surrogate_loss(s, d) >= stump_empirical_loss(s, d) - 1e-9


def test_subgradient_tie_takes_left_arm():
    # equal arms: theta0 == theta1 and w @ x == 0
    s = StumpParams(w=np.array([1.0, -1.0, 0.0]), theta0=np.zeros(2), theta1=np.zeros(2))
    x = np.array([[1.0, 1.0, -1.0]])
    y = np.array([0])
    g_w, g_t0, g_t1 = cccp_subgradient(s, x, y, w_anchor=s.w)
    assert np.array_equal(g_t1, np.zeros(2))
    assert np.allclose(g_t0, LOG_LOSS.grad(s.theta0, 0))
    # anchor @ x == 0 means s_z = +1, so the left arm contributes -(1+1) x
    assert np.allclose(g_w, -2.0 * x[0])


def test_subgradient_matches_finite_differences():
    rng = make_rng(34)
    checked = 0
    while checked < 50:
        k = int(rng.integers(2, 5))
        p = int(rng.integers(2, 7))
        m = int(rng.integers(1, 6))
        x = rng.normal(size=(m, p))
        y = rng.integers(0, k, size=m)
        s = StumpParams(rng.normal(size=p), rng.normal(size=k), rng.normal(size=k))
        anchor = rng.normal(size=p)
        z = x @ s.w
        margins = np.abs(
            (-z + LOG_LOSS.values(s.theta0, y)) - (z + LOG_LOSS.values(s.theta1, y))
        )
        if margins.min() < 1e-3 or np.abs(x @ anchor).min() < 1e-3:
            continue  # too close to a kink for finite differences
        checked += 1

        def pack(v):
            return StumpParams(v[:p], v[p : p + k], v[p + k :])

        v0 = np.concatenate([s.w, s.theta0, s.theta1])
        g_w, g_t0, g_t1 = cccp_subgradient(s, x, y, anchor)
        grad = np.concatenate([g_w, g_t0, g_t1])
        fd = np.zeros_like(v0)
        for i in range(len(v0)):
            step = np.zeros_like(v0)
            step[i] = 1e-5
            fd[i] = (
                cccp_subproblem_loss(pack(v0 + step), x, y, anchor)
                - cccp_subproblem_loss(pack(v0 - step), x, y, anchor)
            ) / 2e-5
        assert np.linalg.norm(grad - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_subproblem_convex_in_w():
    rng = make_rng(35)
    for _ in range(40):
        k, p, m = 3, 4, 12
        x = rng.normal(size=(m, p))
        y = rng.integers(0, k, size=m)
        t0, t1 = rng.normal(size=k), rng.normal(size=k)
        anchor = rng.normal(size=p)
        w1, w2 = rng.normal(size=p), rng.normal(size=p)
        mid = cccp_subproblem_loss(StumpParams((w1 + w2) / 2, t0, t1), x, y, anchor)
        ends = cccp_subproblem_loss(StumpParams(w1, t0, t1), x, y, anchor) + cccp_subproblem_loss(
            StumpParams(w2, t0, t1), x, y, anchor
        )
        assert mid <= ends / 2 + 1e-9


def _random_problem(rng, n=40, p_raw=3, k=2, nu=10.0):
    d = as_dataset(rng.normal(size=(n, p_raw)), rng.integers(0, k, size=n), k=k)
    init = StumpParams(
        project_ball(rng.normal(size=p_raw + 1), nu), rng.normal(size=k), rng.normal(size=k)
    )
    return d, init


def test_cccp_single_class_refits_to_zero_loss():
    d = as_dataset(np.linspace(-1, 1, 12), np.zeros(12, dtype=int), k=2)
    init = StumpParams(np.array([1.0, 0.1]), np.array([0.0, 0.5]), np.array([0.5, 0.0]))
    h = Co2Hyper(nu=4.0, eta=0.05, tau=10, batch_size=12, max_cccp_rounds=5)
    s, _ = cccp_optimize(d, init, h, refit_smoothing=0.0)
    # exact leaves on a pure class make the empirical loss exactly n * 0
    assert stump_empirical_loss(s, d) == pytest.approx(0.0, abs=1e-12)


def test_cccp_separates_two_point_problem():
    d = as_dataset(np.array([[-1.0, 0.0], [1.0, 0.0]]), [0, 1])
    init = StumpParams(np.array([1.0, 0.0, 0.0]), np.array([0.5, -0.5]), np.array([-0.5, 0.5]))
    h = Co2Hyper(nu=10.0, eta=0.05, tau=10, batch_size=2, max_cccp_rounds=10)
    s, _ = cccp_optimize(d, init, h, refit_smoothing=0.0)
    z = d.x @ s.w
    assert (z[0] < 0) and (z[1] >= 0)
    assert stump_empirical_loss(s, d) == pytest.approx(0.0, abs=1e-12)


def test_cccp_trace_monotone_with_full_batch():
    rng = make_rng(36)
    for trial in range(5):
        d, init = _random_problem(rng, n=50)
        h = Co2Hyper(nu=10.0, eta=0.01, tau=60, batch_size=50, max_cccp_rounds=10, seed=trial)
        _, trace = cccp_optimize(d, init, h, rng=make_rng(37, trial))
        for prev, cur in zip(trace.surrogate, trace.surrogate[1:]):
            assert cur <= prev + h.rel_tol * max(1.0, abs(prev))
        for s_val, e_val in zip(trace.surrogate, trace.empirical):
            assert s_val >= e_val - 1e-9


def test_cccp_deterministic():
    rng = make_rng(38)
    d, init = _random_problem(rng)
    h = Co2Hyper(seed=4, batch_size=8)
    s1, t1 = cccp_optimize(d, init.copy(), h)
    s2, t2 = cccp_optimize(d, init.copy(), h)
    assert np.array_equal(s1.w, s2.w)
    assert np.array_equal(s1.theta0, s2.theta0)
    assert np.array_equal(s1.theta1, s2.theta1)
    assert t1.surrogate == t2.surrogate


def test_cccp_respects_norm_bound():
    rng = make_rng(39)
    for trial in range(5):
        nu = float(rng.uniform(0.5, 20))
        d, init = _random_problem(rng, nu=nu)
        h = Co2Hyper(nu=nu, eta=0.05, tau=5, batch_size=10, seed=trial)
        s, trace = cccp_optimize(d, init, h)
        assert float(s.w @ s.w) <= nu + 1e-9
        assert all(norm**2 <= nu + 1e-9 for norm in trace.norm_w)


def test_cccp_never_worse_than_init():
    rng = make_rng(40)
    for trial in range(10):
        d, init = _random_problem(rng, n=30, k=3)
        h = Co2Hyper(eta=0.3, tau=2, batch_size=5, max_cccp_rounds=3, seed=trial)
        s, _ = cccp_optimize(d, init, h)
        init_proj = StumpParams(project_ball(init.w, h.nu), init.theta0, init.theta1)
        assert stump_empirical_loss(s, d) <= stump_empirical_loss(init_proj, d) + 1e-9


def test_cccp_raises_on_divergence():
    rng = make_rng(41)
    d, init = _random_problem(rng, n=20)
    h = Co2Hyper(eta=10.0, tau=50, batch_size=20, max_cccp_rounds=20, refit_leaves=False)
    with pytest.raises(DivergedError), np.errstate(over="ignore", invalid="ignore"):
        cccp_optimize(d, init, h, per_leaf_loss=SQUARED_LOSS)


def test_cccp_rejects_empty_node():
    rng = make_rng(42)
    d, init = _random_problem(rng)
    with pytest.raises(ValueError):
        cccp_optimize(d, init, Co2Hyper(), indices=np.array([], dtype=int))
