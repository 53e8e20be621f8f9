import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from castaway_tracking.estimation import (
    EstimationError,
    FilterParams,
    TargetEstimate,
    fuse,
    fusion_weights,
    initial_estimate,
    predict,
    update,
    update_missed,
)

FP = FilterParams()


def textbook_kf(mean, cov, ops, dt, Q):
    """Plain covariance-form filter with an explicit matrix inverse."""
    F = np.array([[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    H = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
    x, P = np.array(mean, float), np.array(cov, float)
    for op in ops:
        if op[0] == "predict":
            x = F.dot(x)
            P = F.dot(P).dot(F.T) + Q
        elif op[0] == "update":
            _, y, R = op
            S = H.dot(P).dot(H.T) + R
            K = P.dot(H.T).dot(np.linalg.inv(S))
            x = x + K.dot(y - H.dot(x))
            P = (np.eye(4) - K.dot(H)).dot(P)
            P = (P + P.T) / 2
    return x, P


def random_spd(rng, n, scale=1.0):
    M = rng.normal(size=(n, n))
    return scale * (M @ M.T) + 0.1 * np.eye(n)


def random_sequence(rng, length):
    ops = []
    for _ in range(length):
        kind = rng.choice(["predict", "update", "miss"])
        if kind == "update":
            ops.append(("update", rng.normal(0, 5, 2), random_spd(rng, 2, 0.5)))
        else:
            ops.append((kind,))
    return ops


def run_impl(est, ops, params):
    for op in ops:
        if op[0] == "predict":
            est = predict(est, params)
        elif op[0] == "update":
            est = update(est, op[1], op[2], params)
        else:
            est = update_missed(est)
    return est


def test_predict_identity_covariance_trace_six():
    est = TargetEstimate(0, np.zeros(4), np.eye(4))
    out = predict(est, FilterParams(process_noise=np.zeros((4, 4))))
    A = FP.transition
    np.testing.assert_array_equal(out.covariance, A @ A.T)
    assert out.trace == 6.0


def test_stationary_target_mean_unchanged():
    est = TargetEstimate(0, [3.0, 4.0, 0.0, 0.0], np.eye(4))
    assert np.array_equal(predict(est, FP).mean, est.mean)


def test_predict_increases_trace():
    est = initial_estimate(0, (0, 0))
    traces = [est.trace]
    for _ in range(10):
        est = predict(est, FP)
        traces.append(est.trace)
    assert all(b > a for a, b in zip(traces, traces[1:]))


def test_zero_innovation_keeps_mean_shrinks_cov():
    est = TargetEstimate(0, [1.0, 2.0, 0.3, 0.1], np.diag([4, 4, 1, 1.0]))
    out = update(est, [1.0, 2.0], np.eye(2))
    np.testing.assert_array_equal(out.mean, est.mean)
    assert out.trace < est.trace


def test_huge_noise_changes_nothing():
    est = TargetEstimate(0, [1.0, 2.0, 0.3, 0.1], np.diag([4, 4, 1, 1.0]))
    out = update(est, [50.0, -20.0], 1e12 * np.eye(2))
    assert np.max(np.abs(out.covariance - est.covariance)) < 1e-6
    assert np.max(np.abs(out.mean - est.mean)) < 1e-6


def test_singular_innovation_raises():
    est = TargetEstimate(0, np.zeros(4), np.zeros((4, 4)))
    with pytest.raises(EstimationError):
        update(est, [1.0, 1.0], np.zeros((2, 2)))


def test_missed_detection_is_identity():
    est = initial_estimate(2, (1, 1))
    assert update_missed(est) is est


def test_repeated_misses_grow_trace():
    est = initial_estimate(0, (0, 0))
    one = update_missed(predict(est, FP))
    two = update_missed(predict(one, FP))
    assert two.trace > one.trace


def test_ten_missed_cycles_match_matrix_power_oracle():
    A = FP.transition
    Q = FP.process_noise
    est = TargetEstimate(0, np.zeros(4), np.eye(4))
    for _ in range(10):
        est = update_missed(predict(est, FP))
    expect = np.linalg.matrix_power(A, 10) @ np.linalg.matrix_power(A.T, 10)
    expect = expect + sum(np.linalg.matrix_power(A, k) @ Q @ np.linalg.matrix_power(A.T, k) for k in range(10))
    np.testing.assert_allclose(est.covariance, expect, atol=1e-9, rtol=0)


def test_random_sequences_match_textbook_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        mean = rng.normal(0, 10, 4)
        cov = random_spd(rng, 4)
        dt = rng.uniform(0.2, 2.0)
        Q = np.diag(rng.uniform(0, 0.2, 4))
        ops = random_sequence(rng, int(rng.integers(1, 15)))
        params = FilterParams(dt=dt, process_noise=Q)
        got = run_impl(TargetEstimate(0, mean, cov), ops, params)
        x, P = textbook_kf(mean, cov, ops, dt, Q)
        np.testing.assert_allclose(got.mean, x, atol=1e-9, rtol=0)
        np.testing.assert_allclose(got.covariance, P, atol=1e-9, rtol=0)


def test_fusion_weights_inverse_trace():
    np.testing.assert_allclose(fusion_weights([1.0, 3.0]), [0.75, 0.25])


def test_fusion_zero_trace_takes_all_weight_first_wins():
    np.testing.assert_array_equal(fusion_weights([2.0, 0.0, 0.0]), [0.0, 1.0, 0.0])


def test_fuse_single_is_identity():
    e = initial_estimate(1, (2, 3))
    assert fuse([e]) is e


def test_fuse_identical_halves_covariance():
    e = TargetEstimate(4, [1, 2, 3, 4], random_spd(np.random.default_rng(0), 4))
    f = fuse([e, e])
    np.testing.assert_allclose(f.mean, e.mean, atol=1e-15)
    np.testing.assert_allclose(f.covariance, e.covariance / 2, atol=1e-12)


def test_fuse_weights_observed():
    a = TargetEstimate(0, [0, 0, 0, 0], np.diag([0.25] * 4))
    b = TargetEstimate(0, [4, 8, 0, 0], np.diag([0.75] * 4))
    f = fuse([a, b])
    np.testing.assert_allclose(f.mean, [1.0, 2.0, 0, 0])
    np.testing.assert_allclose(f.covariance, 0.75**2 * a.covariance + 0.25**2 * b.covariance)


def test_fuse_rejects_empty_and_mixed_targets():
    with pytest.raises(ValueError):
        fuse([])
    with pytest.raises(ValueError):
        fuse([initial_estimate(0, (0, 0)), initial_estimate(1, (0, 0))])


def test_estimates_are_read_only():
    e = initial_estimate(0, (0, 0))
    with pytest.raises(ValueError):
        e.mean[0] = 1.0


def test_filter_params_validation():
    with pytest.raises(ValueError):
        FilterParams(dt=0)
    with pytest.raises(ValueError):
        FilterParams(process_noise=-np.eye(4))


# --- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_update_never_increases_trace(seed):
    rng = np.random.default_rng(seed)
    est = TargetEstimate(0, rng.normal(size=4), random_spd(rng, 4))
    out = update(est, rng.normal(size=2), random_spd(rng, 2))
    assert out.trace <= est.trace + 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_long_sequences_stay_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    est = initial_estimate(0, (0, 0))
    for op in random_sequence(rng, 1000):
        est = run_impl(est, [op], FP)
        P = est.covariance
        assert np.max(np.abs(P - P.T)) <= 1e-10
    assert np.linalg.eigvalsh(est.covariance).min() >= -1e-9


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_miss_after_predict_equals_predict(seed):
    rng = np.random.default_rng(seed)
    est = TargetEstimate(0, rng.normal(size=4), random_spd(rng, 4))
    a, b = update_missed(predict(est, FP)), predict(est, FP)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=10))
def test_weights_sum_to_one(traces):
    w = fusion_weights(traces)
    assert w.sum() == pytest.approx(1.0)
    assert np.all((w >= 0) & (w <= 1))
