from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskrisk.covariance import CovarianceSpec, build_covariance, signal_from_vector
from maskrisk.errors import EmptyTargetSet, InvalidSpec
from maskrisk.sampling import Fixed, R2MAE, apply_mask_scheme, draw_mask, generate_targets, sample_design


def hoeffding(n: int, fail: float = 1e-4) -> float:
    return math.sqrt(math.log(2 / fail) / (2 * n))


def test_identity_sample_covariance():
    model = build_covariance(CovarianceSpec(), 5, 0)
    X = sample_design(model, 100_000, 1)
    assert np.abs(X.T @ X / X.shape[0] - np.eye(5)).max() <= 0.02
    assert np.abs(X.mean(axis=0)).max() <= 4 / math.sqrt(X.shape[0])


def test_spike_direction_variance():
    model = build_covariance(CovarianceSpec(kind="spiked", delta=10.0), 20, 0)
    X = sample_design(model, 100_000, 2)
    var = np.var(X @ model.spike)
    assert abs(var - 11.0) <= 1.1


def test_noiseless_targets():
    model = build_covariance(CovarianceSpec(), 6, 0)
    X = sample_design(model, 50, 0)
    beta = signal_from_vector(np.arange(6.0))
    assert np.array_equal(generate_targets(X, beta, 0.0, 1), X @ beta.beta)


def test_pure_noise_targets():
    X = np.zeros((100_000, 3))
    y = generate_targets(X, np.zeros(3), 0.04, 3)
    assert abs(y.var() / 0.04 - 1) <= 0.1


def test_full_masking():
    X = np.random.default_rng(0).standard_normal((30, 8))
    ds = apply_mask_scheme(X, X[:, 0], Fixed(1.0), 0)
    assert ds.n_targets == 30
    assert not ds.Z.any()
    assert not ds.X_tilde.any()


def test_zero_ratio_selects_nothing():
    X = np.ones((10, 3))
    with pytest.raises(EmptyTargetSet):
        apply_mask_scheme(X, X[:, 0], Fixed(0.0), 0)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(0.05, 1.0), seed=st.integers(0, 2**63 - 1))
def test_r2mae_degenerate_matches_fixed(p, seed):
    X = np.random.default_rng(1).standard_normal((40, 12))
    y = X[:, 0].copy()
    try:
        a = apply_mask_scheme(X, y, Fixed(p), np.random.default_rng(seed))
    except EmptyTargetSet:
        with pytest.raises(EmptyTargetSet):
            apply_mask_scheme(X, y, R2MAE(p, p), np.random.default_rng(seed))
        return
    b = apply_mask_scheme(X, y, R2MAE(p, p), np.random.default_rng(seed))
    assert np.array_equal(a.selected, b.selected)
    assert np.array_equal(a.Z, b.Z)
    assert a.X_tilde.tobytes() == b.X_tilde.tobytes()
    assert np.array_equal(a.row_ratios, b.row_ratios)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_selected_fraction_band(p):
    selected, _, _ = draw_mask(100_000, 1, Fixed(p), np.random.default_rng(7))
    assert abs(selected.size / 100_000 - p) <= 0.01
    assert 0.01 >= hoeffding(100_000)


@pytest.mark.parametrize("scheme", [Fixed(0.3), Fixed(0.75), R2MAE(0.4, 0.6)])
def test_masked_entry_fraction(scheme):
    _, keep, ratios = draw_mask(40_000, 100, scheme, np.random.default_rng(8))
    assert keep.size >= 1_000_000
    assert abs((1 - keep.mean()) - ratios.mean()) <= 0.01


def test_r2mae_inclusion_follows_row_ratio():
    rng = np.random.default_rng(9)
    selected, _, ratios = draw_mask(200_000, 1, R2MAE(0.2, 0.8), rng)
    # selected rows are tilted toward high ratios: E[p | selected] = E[p^2] / E[p]
    expected = (0.8**3 - 0.2**3) / 3 / 0.6 / 0.5
    assert abs(ratios.mean() - expected) <= 0.01


@settings(max_examples=30, deadline=None)
@given(p=st.floats(0.1, 0.95), seed=st.integers(0, 2**32 - 1))
def test_zeros_exactly_where_masked(p, seed):
    X = np.random.default_rng(seed).standard_normal((25, 9))
    try:
        ds = apply_mask_scheme(X, X[:, 1], Fixed(p), seed)
    except EmptyTargetSet:
        return
    assert np.array_equal(ds.X_tilde == 0, ds.Z == 0)
    assert np.array_equal(ds.X_tilde[ds.Z == 1], X[ds.selected][ds.Z == 1])
    again = apply_mask_scheme(X, X[:, 1], Fixed(p), seed)
    assert again.X_tilde.tobytes() == ds.X_tilde.tobytes()


def test_deterministic_subset_size():
    selected, _, _ = draw_mask(101, 4, Fixed(0.3), np.random.default_rng(0), deterministic_subset=True)
    assert selected.size == round(101 * 0.3)
    with pytest.raises(InvalidSpec):
        draw_mask(10, 4, R2MAE(0.2, 0.4), np.random.default_rng(0), deterministic_subset=True)


def test_invalid_schemes():
    with pytest.raises(InvalidSpec):
        Fixed(1.5)
    with pytest.raises(InvalidSpec):
        R2MAE(0.6, 0.5)
