"""Moment machinery and MI estimator against independent oracles.

The entropy oracle is a scalar math.exp/math.log loop; the running
recursion is checked against a hand-unrolled reference; mixture moments
are checked against Monte-Carlo sampling.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marlab.gaussians import (
    VARIANCE_FLOOR,
    ActionWindow,
    DiagGaussian,
    MarginalEstimate,
    batch_moments,
    mixture_moments,
    plugin_entropy,
    policy_mutual_information,
    running_update,
    window_snapshot_moments,
)
from marlab.nets import make_rng


# ---------------------------------------------------------------- oracles


def brute_entropy(mean, var, batch):
    """Scalar re-implementation of the unnormalized plug-in entropy."""
    total = 0.0
    for a in batch:
        p = 1.0
        for d in range(len(mean)):
            z = (a[d] - mean[d]) ** 2 / (2.0 * var[d])
            p *= math.exp(-z) / math.sqrt(2.0 * math.pi * var[d])
        if p > 0.0:
            total += -p * math.log(p)
    return total


def unroll_recursion(alpha, mu0, s20, updates):
    """Hand-unrolled running-moment recursion (scalar loops)."""
    mu_hat = list(mu0)
    s2_hat = list(s20)
    for mu_n, s2_n in updates:
        new_mu = [alpha * m + (1 - alpha) * mh for m, mh in zip(mu_n, mu_hat)]
        new_s2 = [
            alpha * s + (1 - alpha) * sh
            + (alpha * m * m + (1 - alpha) * mh * mh)
            - (alpha * m + (1 - alpha) * mh) ** 2
            for s, sh, m, mh in zip(s2_n, s2_hat, mu_n, mu_hat)
        ]
        mu_hat, s2_hat = new_mu, new_s2
    return np.array(mu_hat), np.array(s2_hat)


# ---------------------------------------------------------- batch moments


def test_batch_moments_single_sample():
    g = batch_moments([(1.0, 1.0)])
    np.testing.assert_array_equal(g.mean, [1.0, 1.0])
    np.testing.assert_array_equal(g.var, [VARIANCE_FLOOR, VARIANCE_FLOOR])


def test_batch_moments_two_points():
    g = batch_moments([(0.0, 0.0), (2.0, 0.0)])
    np.testing.assert_array_equal(g.mean, [1.0, 0.0])
    np.testing.assert_array_equal(g.var, [1.0, VARIANCE_FLOOR])


def test_batch_moments_recovers_sampled_gaussian():
    rng = make_rng(100)
    draws = rng.normal(0.5, 0.2, size=(1000, 3))
    g = batch_moments(draws)
    assert np.all(np.abs(g.mean - 0.5) < 0.03)
    assert np.all(np.abs(g.var - 0.04) < 0.01)


def test_batch_moments_empty_raises():
    with pytest.raises(ValueError):
        batch_moments(np.zeros((0, 2)))


def test_diag_gaussian_validation():
    with pytest.raises(ValueError):
        DiagGaussian(np.zeros(2), np.ones(3))
    with pytest.raises(ValueError):
        DiagGaussian(np.zeros(2), np.array([1.0, 0.0]))


# -------------------------------------------------------- mixture moments


def test_mixture_single_component_identity():
    g = mixture_moments([1.0], [[0.3, -0.2]], [[0.5, 0.25]])
    np.testing.assert_array_equal(g.mean, [0.3, -0.2])
    np.testing.assert_array_equal(g.var, [0.5, 0.25])


def test_mixture_symmetric_two_point():
    g = mixture_moments([0.5, 0.5], [[-1.0], [1.0]], [[0.0], [0.0]])
    np.testing.assert_array_equal(g.mean, [0.0])
    np.testing.assert_array_equal(g.var, [1.0])


def test_mixture_matches_monte_carlo():
    rng = make_rng(101)
    weights = np.array([0.5, 0.3, 0.2])
    means = rng.uniform(1.0, 2.0, size=(3, 2))
    variances = rng.uniform(0.25, 1.0, size=(3, 2))
    g = mixture_moments(weights, means, variances)

    n = 1_000_000
    comp = rng.choice(3, size=n, p=weights)
    samples = rng.normal(means[comp], np.sqrt(variances[comp]))
    mc_mean = samples.mean(axis=0)
    mc_var = samples.var(axis=0)
    np.testing.assert_allclose(g.mean, mc_mean, rtol=0.01)
    np.testing.assert_allclose(g.var, mc_var, rtol=0.01)


def test_mixture_weight_sum_violation():
    with pytest.raises(ValueError):
        mixture_moments([0.6, 0.6], [[0.0], [1.0]], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        mixture_moments([0.5, 0.5], [[0.0]], [[1.0], [1.0]])


# ------------------------------------------------------- running estimate


def test_running_update_first_call_seeds_estimate():
    est = MarginalEstimate(alpha=0.001)
    assert not est.initialized
    running_update(est, [0.5, -0.5], [0.04, 0.0])
    assert est.initialized
    np.testing.assert_array_equal(est.gaussian.mean, [0.5, -0.5])
    np.testing.assert_array_equal(est.gaussian.var, [0.04, VARIANCE_FLOOR])


def test_running_update_alpha_one_endpoint():
    est = MarginalEstimate(alpha=1.0)
    running_update(est, [0.0], [1.0])
    running_update(est, [3.0], [0.25])
    np.testing.assert_allclose(est.gaussian.mean, [3.0], atol=1e-15)
    np.testing.assert_allclose(est.gaussian.var, [0.25], atol=1e-15)


def test_running_update_fixed_point():
    est = MarginalEstimate(alpha=0.001)
    running_update(est, [0.7, -0.1], [0.5, 0.3])
    running_update(est, [0.7, -0.1], [0.5, 0.3])
    np.testing.assert_allclose(est.gaussian.mean, [0.7, -0.1], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(est.gaussian.var, [0.5, 0.3], rtol=1e-12, atol=1e-14)


def test_running_update_matches_unrolled_recursion_short():
    updates = [
        ([0.2, -0.3], [0.5, 0.7]),
        ([0.1, 0.4], [0.6, 0.2]),
        ([-0.5, 0.0], [0.3, 0.9]),
    ]
    est = MarginalEstimate(alpha=0.001)
    running_update(est, [0.0, 0.0], [1.0, 1.0])
    for mu, s2 in updates:
        running_update(est, mu, s2)
    ref_mu, ref_s2 = unroll_recursion(0.001, [0.0, 0.0], [1.0, 1.0], updates)
    np.testing.assert_allclose(est.gaussian.mean, ref_mu, atol=1e-12)
    np.testing.assert_allclose(est.gaussian.var, ref_s2, atol=1e-12)


def test_running_update_matches_unrolled_recursion_long():
    rng = make_rng(102)
    updates = [
        (rng.uniform(-1, 1, size=3), rng.uniform(0.01, 1.0, size=3))
        for _ in range(1000)
    ]
    est = MarginalEstimate(alpha=0.05)
    running_update(est, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    for mu, s2 in updates:
        running_update(est, mu, s2)
    ref_mu, ref_s2 = unroll_recursion(
        0.05, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0], updates
    )
    np.testing.assert_allclose(est.gaussian.mean, ref_mu, atol=1e-12)
    np.testing.assert_allclose(est.gaussian.var, ref_s2, atol=1e-12)


def test_running_update_dimension_mismatch():
    est = MarginalEstimate(alpha=0.5)
    running_update(est, [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        running_update(est, [0.0], [1.0])
    with pytest.raises(ValueError):
        running_update(est, [0.0, 0.0], [1.0])


def test_marginal_estimate_alpha_validation():
    with pytest.raises(ValueError):
        MarginalEstimate(alpha=0.0)
    with pytest.raises(ValueError):
        MarginalEstimate(alpha=1.5)


# ----------------------------------------------------------- action window


def test_window_basic_moments():
    w = ActionWindow(dim=2, capacity=100)
    w.push([0.0, 0.0])
    w.push([2.0, 0.0])
    g = window_snapshot_moments(w)
    np.testing.assert_array_equal(g.mean, [1.0, 0.0])


def test_window_eviction_is_fifo():
    w = ActionWindow(dim=1, capacity=100)
    for i in range(1, 102):  # 101 insertions of values 1..101
        w.push([float(i)])
    assert len(w) == 100
    np.testing.assert_array_equal(w.contents()[:, 0], np.arange(2.0, 102.0))
    g = window_snapshot_moments(w)
    assert g.mean[0] == np.arange(2.0, 102.0).mean()


def test_window_constant_actions_hit_variance_floor():
    w = ActionWindow(dim=2, capacity=100)
    for _ in range(100):
        w.push([0.3, -0.7])
    g = window_snapshot_moments(w)
    np.testing.assert_array_equal(g.var, [VARIANCE_FLOOR, VARIANCE_FLOOR])


def test_window_snapshot_requires_two_entries():
    w = ActionWindow(dim=2)
    w.push([0.0, 0.0])
    with pytest.raises(ValueError):
        window_snapshot_moments(w)


# ---------------------------------------------------------- plugin entropy


def test_plugin_entropy_single_point_at_mean():
    g = DiagGaussian([0.0], [1.0])
    p = 1.0 / math.sqrt(2.0 * math.pi)
    expected = -p * math.log(p)
    assert abs(plugin_entropy(g, [[0.0]]) - expected) < 1e-12


def test_plugin_entropy_tail_point_contributes_zero():
    g = DiagGaussian([0.0], [1.0])
    assert plugin_entropy(g, [[1e6]]) == 0.0


def test_plugin_entropy_matches_brute_force():
    rng = make_rng(103)
    for trial in range(5):
        dim = int(rng.integers(1, 5))
        mean = rng.uniform(-1, 1, size=dim)
        var = rng.uniform(0.01, 2.0, size=dim)
        batch = rng.uniform(-2, 2, size=(32, dim))
        g = DiagGaussian(mean, var)
        assert abs(plugin_entropy(g, batch) - brute_entropy(mean, var, batch)) < 1e-10


def test_plugin_entropy_permutation_invariant_and_additive():
    rng = make_rng(104)
    g = DiagGaussian(rng.uniform(-1, 1, 3), rng.uniform(0.1, 1.0, 3))
    batch = rng.uniform(-2, 2, size=(40, 3))
    full = plugin_entropy(g, batch)
    perm = plugin_entropy(g, batch[rng.permutation(40)])
    parts = plugin_entropy(g, batch[:17]) + plugin_entropy(g, batch[17:])
    assert abs(full - perm) < 1e-12
    assert abs(full - parts) < 1e-12


def test_plugin_entropy_empty_batch_raises():
    g = DiagGaussian([0.0], [1.0])
    with pytest.raises(ValueError):
        plugin_entropy(g, np.zeros((0, 1)))


def test_plugin_entropy_dimension_mismatch():
    g = DiagGaussian([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        plugin_entropy(g, [[0.0]])


# ------------------------------------------------------ mutual information


def _estimate_from(gaussian):
    est = MarginalEstimate(alpha=0.001)
    running_update(est, gaussian.mean, gaussian.var)
    return est


def test_mi_zero_when_marginal_equals_batch_moments():
    rng = make_rng(105)
    batch = rng.uniform(-1, 1, size=(16, 2))
    est = _estimate_from(batch_moments(batch))
    assert policy_mutual_information(est, batch) == 0.0


def test_mi_positive_for_diffuse_marginal_tight_batch():
    rng = make_rng(106)
    batch = rng.normal(0.0, 0.01, size=(32, 2))
    est = _estimate_from(DiagGaussian([0.0, 0.0], [100.0, 100.0]))
    mi = policy_mutual_information(est, batch)
    bm = batch_moments(batch)
    expected = brute_entropy([0.0, 0.0], [100.0, 100.0], batch) - brute_entropy(
        bm.mean, bm.var, batch
    )
    assert mi > 0.0
    assert abs(mi - expected) < 1e-10 * max(1.0, abs(expected))


def test_mi_negative_allowed_for_wide_batch():
    rng = make_rng(107)
    batch = rng.normal(0.0, 3.0, size=(32, 2))
    est = _estimate_from(DiagGaussian([0.0, 0.0], [0.01, 0.01]))
    mi = policy_mutual_information(est, batch)
    bm = batch_moments(batch)
    expected = brute_entropy([0.0, 0.0], [0.01, 0.01], batch) - brute_entropy(
        bm.mean, bm.var, batch
    )
    assert mi < 0.0
    assert abs(mi - expected) < 1e-10 * max(1.0, abs(expected))


def test_mi_requires_initialized_marginal():
    with pytest.raises(ValueError):
        policy_mutual_information(MarginalEstimate(alpha=0.001), [[0.0]])


# ---------------------------------------------------------------- property


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(1, 64),
    dim=st.integers(1, 5),
)
def test_moments_and_entropy_never_emit_nonfinite(seed, n, dim):
    rng = make_rng(seed)
    batch = rng.uniform(-10, 10, size=(n, dim))
    g = batch_moments(batch)
    assert np.all(g.var >= VARIANCE_FLOOR)
    assert np.all(g.mean >= batch.min(axis=0) - 1e-12)
    assert np.all(g.mean <= batch.max(axis=0) + 1e-12)
    h = plugin_entropy(g, batch)
    assert math.isfinite(h)
    est = _estimate_from(DiagGaussian(np.zeros(dim), np.full(dim, 1e-6)))
    assert math.isfinite(policy_mutual_information(est, batch))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), steps=st.integers(1, 30))
def test_running_update_keeps_variance_floored(seed, steps):
    rng = make_rng(seed)
    est = MarginalEstimate(alpha=float(rng.uniform(0.001, 1.0)))
    for _ in range(steps):
        running_update(est, rng.uniform(-1, 1, 2), rng.uniform(0.0, 0.5, 2))
        assert np.all(est.gaussian.var >= VARIANCE_FLOOR)
