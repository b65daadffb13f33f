from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskrisk.covariance import CovarianceSpec, build_covariance, signal_from_vector
from maskrisk.errors import DegenerateInput
from maskrisk.estimator import PseudoInverse, RidgeLimit, min_norm_fit, pinv
from maskrisk.metrics import exact_risk
from maskrisk.sampling import Fixed, apply_mask_scheme, sample_design


def test_identity_design():
    y = np.array([1.0, -2.0, 3.0])
    assert np.allclose(min_norm_fit(np.eye(3), y), y, atol=1e-15)


def test_zero_design():
    assert not np.any(min_norm_fit(np.zeros((4, 6)), np.ones(4)))


def test_matches_numpy_pinv():
    X = np.random.default_rng(0).standard_normal((15, 40))
    y = np.random.default_rng(1).standard_normal(15)
    assert np.allclose(min_norm_fit(X, y), np.linalg.pinv(X) @ y, atol=1e-12)
    assert np.allclose(pinv(X), np.linalg.pinv(X), atol=1e-12)


def test_rejects_nonfinite():
    X = np.ones((3, 3))
    X[0, 0] = np.nan
    with pytest.raises(DegenerateInput):
        min_norm_fit(X, np.ones(3))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 20),
    extra=st.integers(0, 30),
    p=st.floats(0.0, 0.6),
    seed=st.integers(0, 2**32 - 1),
)
def test_interpolation_and_minimality(n, extra, p, seed):
    rng = np.random.default_rng(seed)
    d = n + extra
    X = rng.standard_normal((n, d)) * (rng.random((n, d)) >= p)
    y = rng.standard_normal(n)
    beta = min_norm_fit(X, y)
    if np.linalg.matrix_rank(X) == n:
        assert np.linalg.norm(X @ beta - y) <= 1e-8 * np.linalg.norm(y)
    _, s, vt = np.linalg.svd(X)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    if rank < d:
        z = vt[rank:].T @ rng.standard_normal(d - rank)
        z /= np.linalg.norm(z)
        assert np.linalg.norm(beta + 1e-3 * z) > np.linalg.norm(beta)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), seed=st.integers(0, 2**32 - 1))
def test_scale_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((8, 20))
    y = rng.standard_normal(8)
    base = min_norm_fit(X, y)
    assert np.allclose(min_norm_fit(X, c * y), c * base, rtol=1e-12, atol=1e-12 * abs(c) * np.abs(base).max())


def test_multiple_right_hand_sides():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10, 30))
    Y = rng.standard_normal((10, 3))
    joint = min_norm_fit(X, Y)
    for k in range(3):
        assert np.allclose(joint[:, k], min_norm_fit(X, Y[:, k]), atol=1e-14)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_ridge_limit_agrees_with_pinv(p):
    model = build_covariance(CovarianceSpec(kind="spiked", delta=10.0), 300, 0)
    beta = signal_from_vector(np.ones(300) / np.sqrt(300))
    X = sample_design(model, 60, 1)
    ds = apply_mask_scheme(X, X @ beta.beta, Fixed(p), 2)
    a = exact_risk(min_norm_fit(ds.X_tilde, ds.y_tilde, PseudoInverse()), beta, model).risk
    b = exact_risk(min_norm_fit(ds.X_tilde, ds.y_tilde, RidgeLimit(1e-6)), beta, model).risk
    assert abs(a - b) <= 1e-4 * a
