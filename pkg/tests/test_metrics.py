from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskrisk.covariance import CovarianceSpec, build_covariance, haar_orthogonal, signal_from_vector
from maskrisk.errors import ZeroMatrix
from maskrisk.metrics import effective_rank, exact_risk, magnitude_ratio, null_risk, sample_risk


def test_exact_risk_trivial_cases():
    model = build_covariance(CovarianceSpec(), 4, 0)
    beta = signal_from_vector(np.array([1.0, 2.0, 0.0, 0.0]))
    assert exact_risk(beta.beta, beta, model).risk == 0.0
    assert math.isclose(null_risk(beta, model).risk, 5.0)
    assert math.isclose(null_risk(beta, model).normalized, 1.0)
    shifted = beta.beta + np.eye(4)[0]
    assert math.isclose(exact_risk(shifted, beta, model).risk, 1.0)


def test_exact_risk_rotation_invariance():
    rng = np.random.default_rng(0)
    model = build_covariance(CovarianceSpec(kind="spectrum"), 12, 1)
    beta = signal_from_vector(rng.standard_normal(12))
    beta_hat = rng.standard_normal(12)
    u = haar_orthogonal(12, rng)
    base = (beta_hat - beta.beta) @ model.sigma @ (beta_hat - beta.beta)
    rotated = (u @ (beta_hat - beta.beta)) @ (u @ model.sigma @ u.T) @ (u @ (beta_hat - beta.beta))
    assert abs(exact_risk(beta_hat, beta, model).risk - base) <= 1e-10 * base
    assert abs(rotated - base) <= 1e-10 * base


def test_sample_risk_zero_at_truth():
    model = build_covariance(CovarianceSpec(), 5, 0)
    beta = signal_from_vector(np.ones(5))
    assert sample_risk(beta.beta, beta, model, 100, 0).risk == 0.0


def test_sample_risk_unbiased():
    model = build_covariance(CovarianceSpec(kind="spiked", delta=4.0), 10, 0)
    beta = signal_from_vector(np.linspace(-1, 1, 10))
    beta_hat = np.zeros(10) + 0.1
    exact = exact_risk(beta_hat, beta, model).risk
    rng = np.random.default_rng(5)
    draws = np.array([sample_risk(beta_hat, beta, model, 10_000, rng).risk for _ in range(100)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - exact) <= 3 * se


def test_effective_rank_examples():
    assert math.isclose(effective_rank(np.eye(5)), 5.0)
    assert math.isclose(effective_rank(np.outer([1.0, 2.0], [3.0, 4.0, 5.0])), 1.0)
    assert math.isclose(effective_rank(np.diag([2.0, 2.0, 0.0])), 2.0)
    with pytest.raises(ZeroMatrix):
        effective_rank(np.zeros((3, 3)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=8).filter(lambda s: max(s) > 1e-3))
def test_effective_rank_bounds(values):
    s = np.sort(np.array(values))[::-1]
    s = np.where(s > 1e-3, s, 0.0)
    rank = int(np.count_nonzero(s))
    er = effective_rank(np.diag(s))
    assert 1.0 - 1e-12 <= er <= rank + 1e-9
    equal = np.allclose(s[:rank], s[0], rtol=1e-12)
    assert equal == math.isclose(er, rank, rel_tol=1e-9)


def test_magnitude_ratio():
    X = np.random.default_rng(0).standard_normal((30, 6))
    b = np.random.default_rng(1).standard_normal(6)
    assert math.isclose(magnitude_ratio(X, b, b), 1.0)
    assert math.isclose(magnitude_ratio(X, 2 * b, b), 4.0)
    with pytest.raises(ZeroDivisionError):
        magnitude_ratio(X, b, np.zeros(6))
