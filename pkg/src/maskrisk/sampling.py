"""Gaussian designs, noisy targets and target-selection + feature masking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .covariance import Array, CovarianceModel, SignalVector
from .errors import EmptyTargetSet, InvalidSpec
from .rng import as_generator


@dataclass(frozen=True)
class Fixed:
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise InvalidSpec(f"masking ratio {self.p} outside [0, 1]")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.p, self.p

    @property
    def tag(self) -> str:
        return "fixed"


@dataclass(frozen=True)
class R2MAE:
    """Row-wise masking ratio drawn from U(p_min, p_max)."""

    p_min: float
    p_max: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_min <= self.p_max <= 1.0:
            raise InvalidSpec(f"need 0 <= p_min <= p_max <= 1, got ({self.p_min}, {self.p_max})")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.p_min, self.p_max

    @property
    def tag(self) -> str:
        return "r2mae"


MaskScheme = Fixed | R2MAE


@dataclass(frozen=True, eq=False)
class MaskedDataset:
    X: Array
    y: Array
    selected: NDArray[np.intp]
    X_tilde: Array
    y_tilde: Array
    Z: NDArray[np.int8]
    row_ratios: Array
    sigma2: float = float("nan")

    @property
    def n_targets(self) -> int:
        return int(self.selected.size)

    @property
    def kept(self) -> NDArray[np.bool_]:
        return self.Z.astype(bool)


def sample_design(
    model: CovarianceModel, n: int, rng: np.random.Generator | int | None = None
) -> Array:
    """n iid rows from N(0, Sigma), built as Q diag(sqrt(lambda)) g."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    g = rng.standard_normal((n, model.d))
    root = np.sqrt(np.clip(model.eigenvalues, 0.0, None))
    return (g * root) @ model.eigenvectors.T


def generate_targets(
    X: Array,
    beta: SignalVector | Array,
    sigma2: float,
    rng: np.random.Generator | int | None = None,
) -> Array:
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    rng = as_generator(rng)
    b = beta.beta if isinstance(beta, SignalVector) else np.asarray(beta, dtype=float)
    noise = rng.standard_normal(X.shape[0])
    return X @ b + np.sqrt(sigma2) * noise


def draw_mask(
    n: int,
    d: int,
    scheme: MaskScheme,
    rng: np.random.Generator,
    deterministic_subset: bool = False,
) -> tuple[NDArray[np.intp], NDArray[np.int8], Array]:
    """Draw (selected rows, keep-mask, per-row ratios) for ``n`` rows.

    Each row consumes ``d + 2`` uniforms in a fixed order: the ratio draw,
    the inclusion coin, then one coin per feature. Fixed(p) consumes the
    ratio draw too, so Fixed(p) and R2MAE(p, p) see identical streams.
    """
    lo, hi = scheme.bounds
    u = rng.random((n, d + 2))
    ratios = lo + (hi - lo) * u[:, 0]
    if deterministic_subset:
        if not isinstance(scheme, Fixed):
            raise InvalidSpec("deterministic_subset applies to fixed schemes only")
        k = int(round(n * scheme.p))
        selected = np.sort(np.argsort(u[:, 1], kind="stable")[:k])
    else:
        selected = np.flatnonzero(u[:, 1] < ratios)
    if selected.size == 0:
        raise EmptyTargetSet(f"no target rows selected (n={n}, scheme={scheme})")
    coins = u[selected, 2:]
    keep = (coins >= ratios[selected, None]).astype(np.int8)
    return selected, keep, ratios[selected]


def apply_mask_scheme(
    X: Array,
    y: Array,
    scheme: MaskScheme,
    rng: np.random.Generator | int | None = None,
    *,
    deterministic_subset: bool = False,
    sigma2: float = float("nan"),
) -> MaskedDataset:
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"X {X.shape} and y {y.shape} do not conform")
    rng = as_generator(rng)
    n, d = X.shape
    selected, keep, ratios = draw_mask(n, d, scheme, rng, deterministic_subset)
    x_sub = X[selected]
    return MaskedDataset(
        X=X,
        y=y,
        selected=selected,
        X_tilde=x_sub * keep,
        y_tilde=y[selected],
        Z=keep,
        row_ratios=ratios,
        sigma2=float(sigma2),
    )
