"""Minimum-norm (ridgeless) least squares on the corrupted design."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import Array
from .errors import DegenerateInput, InvalidSpec


@dataclass(frozen=True)
class PseudoInverse:
    """Moore-Penrose solve; singular values below rcond * s_max are dropped.

    ``rcond=None`` means eps * max(n, d) * 100.
    """

    rcond: float | None = None

    def __post_init__(self) -> None:
        if self.rcond is not None and not self.rcond > 0:
            raise InvalidSpec("rcond must be positive")


@dataclass(frozen=True)
class RidgeLimit:
    lam: float = 1e-6

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise InvalidSpec("ridge lambda must be positive")


FitMethod = PseudoInverse | RidgeLimit


def default_rcond(shape: tuple[int, int]) -> float:
    return float(np.finfo(float).eps * max(shape) * 100)


def _spectral_parts(X: Array) -> tuple[Array, Array, Array]:
    if not np.all(np.isfinite(X)):
        raise DegenerateInput("design contains non-finite entries")
    return np.linalg.svd(X, full_matrices=False)


def pinv(X: Array, rcond: float | None = None) -> Array:
    """Pseudo-inverse with the package's cutoff convention."""
    u, s, vt = _spectral_parts(X)
    if rcond is None:
        rcond = default_rcond(X.shape)
    if s.size == 0 or s[0] == 0:
        return np.zeros((X.shape[1], X.shape[0]))
    inv = np.where(s > rcond * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def min_norm_fit(X_tilde: Array, y_tilde: Array, method: FitMethod | None = None) -> Array:
    """Ridgeless coefficient vector; both methods solve in the singular basis."""
    X_tilde = np.asarray(X_tilde, dtype=float)
    y_tilde = np.asarray(y_tilde, dtype=float)
    if X_tilde.ndim != 2 or y_tilde.shape[0] != X_tilde.shape[0] or X_tilde.shape[0] < 1:
        raise ValueError(f"shapes {X_tilde.shape} and {y_tilde.shape} do not conform")
    if not np.all(np.isfinite(y_tilde)):
        raise DegenerateInput("targets contain non-finite entries")
    method = method or PseudoInverse()
    u, s, vt = _spectral_parts(X_tilde)
    proj = u.T @ y_tilde
    if s.size == 0 or s[0] == 0:
        return np.zeros((X_tilde.shape[1],) + y_tilde.shape[1:])
    if isinstance(method, RidgeLimit):
        gain = s / (s * s + method.lam)
    else:
        rcond = method.rcond if method.rcond is not None else default_rcond(X_tilde.shape)
        gain = np.where(s > rcond * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    # y_tilde may carry extra right-hand sides as columns
    return vt.T @ (gain.reshape((-1,) + (1,) * (proj.ndim - 1)) * proj)
