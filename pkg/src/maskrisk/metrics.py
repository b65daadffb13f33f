"""Test risk, effective rank and prediction-magnitude ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import Array, CovarianceModel, SignalVector
from .errors import ZeroMatrix
from .rng import as_generator
from .sampling import sample_design


@dataclass(frozen=True)
class RiskValue:
    risk: float
    normalized: float
    basis: str = "exact"
    n_test: int | None = None


def _normalize(risk: float, beta: SignalVector) -> float:
    r2 = beta.r2
    return risk / r2 if r2 > 0 else float("nan")


def exact_risk(beta_hat: Array, beta: SignalVector, model: CovarianceModel) -> RiskValue:
    """(beta_hat - beta)^T Sigma (beta_hat - beta), computed in the eigenbasis."""
    err = np.asarray(beta_hat, dtype=float) - beta.beta
    risk = max(model.quadratic(err), 0.0)
    return RiskValue(risk=risk, normalized=_normalize(risk, beta))


def exact_risk_batch(beta_hats: Array, beta: SignalVector, model: CovarianceModel) -> Array:
    """Exact risk for each column of a d x k matrix of estimates."""
    err = beta_hats - beta.beta[:, None]
    proj = model.eigenvectors.T @ err
    return np.clip(np.einsum("i,ij,ij->j", model.eigenvalues, proj, proj), 0.0, None)


def null_risk(beta: SignalVector, model: CovarianceModel) -> RiskValue:
    return exact_risk(np.zeros_like(beta.beta), beta, model)


def sample_risk(
    beta_hat: Array,
    beta: SignalVector,
    model: CovarianceModel,
    n_test: int,
    rng: np.random.Generator | int | None = None,
) -> RiskValue:
    """Mean squared prediction gap on ``n_test`` fresh rows from N(0, Sigma)."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    rng = as_generator(rng)
    x0 = sample_design(model, n_test, rng)
    gap = x0 @ (np.asarray(beta_hat, dtype=float) - beta.beta)
    risk = float(np.mean(gap * gap))
    return RiskValue(risk=risk, normalized=_normalize(risk, beta), basis="sample", n_test=n_test)


def effective_rank(M: Array) -> float:
    """exp of the Shannon entropy of the sum-normalized singular values."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(M, dtype=float)), compute_uv=False)
    total = s.sum()
    if not total > 0:
        raise ZeroMatrix("effective rank of a zero matrix is undefined")
    q = s / total
    q = q[q > 0]
    return float(np.exp(-np.sum(q * np.log(q))))


def magnitude_ratio(X_eval: Array, beta_hat_0: Array, beta_hat_1: Array) -> float:
    """||X beta_hat_0||^2 / ||X beta_hat_1||^2 on a shared evaluation design."""
    num = float(np.sum((X_eval @ beta_hat_0) ** 2))
    den = float(np.sum((X_eval @ beta_hat_1) ** 2))
    if not den > 0:
        raise ZeroDivisionError("reference prediction has zero magnitude")
    return num / den
