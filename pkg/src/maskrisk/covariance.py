"""Population covariance models, ground-truth signals and the masked covariance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import (
    EigendecompositionUnavailable,
    InvalidSpec,
    MissingSpike,
    NonPositiveDefinite,
)
from .rng import as_generator

Array = NDArray[np.float64]

COVARIANCE_KINDS = ("identity", "spiked", "spectrum", "latent_iid", "latent_structured")
SIGNAL_KINDS = ("eigenvector", "angle", "latent", "uniform", "explicit")


@dataclass(frozen=True)
class CovarianceSpec:
    """Construction descriptor for a covariance model.

    ``spike`` selects the spike direction of the spiked kind: ``"uniform"``
    (iid U(0,1) entries, normalized) or ``"ones"`` (1/sqrt(d) everywhere);
    ``spike_vector`` overrides both with an explicit direction.
    ``spectrum`` is ``"uniform"`` (iid U(1,10)) or ``"beta"`` (Beta(2,6)
    rescaled onto [1, 10]). Latent kinds take either ``q`` or ``q_ratio``.
    """

    kind: str = "identity"
    delta: float = 0.0
    spike: str = "uniform"
    spike_vector: tuple[float, ...] | None = None
    spectrum: str = "uniform"
    q: int | None = None
    q_ratio: float | None = None
    eig_value: float = 100.0

    def __post_init__(self) -> None:
        if self.kind not in COVARIANCE_KINDS:
            raise InvalidSpec(f"unknown covariance kind {self.kind!r}")
        if self.kind == "spiked":
            if not np.isfinite(self.delta) or self.delta < 0:
                raise InvalidSpec("spike strength delta must be >= 0")
            if self.spike_vector is None and self.spike not in ("uniform", "ones"):
                raise InvalidSpec(f"unknown spike direction {self.spike!r}")
        if self.kind == "spectrum" and self.spectrum not in ("uniform", "beta"):
            raise InvalidSpec(f"unknown spectrum {self.spectrum!r}")
        if self.kind == "latent_structured" and not self.eig_value > 0:
            raise InvalidSpec("eig_value must be positive")

    def latent_dim(self, d: int) -> int:
        if self.q is not None:
            q = int(self.q)
        elif self.q_ratio is not None:
            q = int(round(self.q_ratio * d))
        else:
            raise InvalidSpec("latent kinds need q or q_ratio")
        if not 0 < q < d:
            raise InvalidSpec(f"latent dimension q={q} must satisfy 0 < q < d={d}")
        return q


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Population covariance with its eigendecomposition cached.

    Eigenvalues are sorted in descending order and ``eigenvectors[:, i]``
    belongs to ``eigenvalues[i]``. ``spike`` and ``delta`` are set for the
    spiked kind, ``loadings`` (the d x q matrix W) for the latent kinds.
    """

    d: int
    sigma: Array
    eigenvalues: Array
    eigenvectors: Array
    spec: CovarianceSpec
    spike: Array | None = None
    delta: float = 0.0
    loadings: Array | None = None

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def diag(self) -> Array:
        return np.diag(self.sigma).copy()

    def quadratic(self, x: Array) -> float:
        """x^T Sigma x evaluated in the eigenbasis."""
        proj = self.eigenvectors.T @ x
        return float(np.sum(self.eigenvalues * proj * proj))


def haar_orthogonal(dim: int, rng: np.random.Generator) -> Array:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _from_eigh(sigma: Array) -> tuple[Array, Array]:
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], vecs[:, order]


def _sorted_pair(vals: Array, vecs: Array) -> tuple[Array, Array]:
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], np.ascontiguousarray(vecs[:, order])


def _symmetrize(a: Array) -> Array:
    return 0.5 * (a + a.T)


def spike_direction(spec: CovarianceSpec, d: int, rng: np.random.Generator) -> Array:
    if spec.spike_vector is not None:
        v = np.asarray(spec.spike_vector, dtype=float)
        if v.shape != (d,):
            raise InvalidSpec(f"spike_vector has shape {v.shape}, expected ({d},)")
    elif spec.spike == "ones":
        v = np.ones(d)
    else:
        v = rng.uniform(0.0, 1.0, size=d)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise InvalidSpec("spike direction has zero norm")
    return v / norm


def spectrum_values(kind: str, d: int, rng: np.random.Generator) -> Array:
    if kind == "uniform":
        return rng.uniform(1.0, 10.0, size=d)
    draws = rng.beta(2.0, 6.0, size=d)
    lo, hi = draws.min(), draws.max()
    if not hi > lo:
        raise InvalidSpec("degenerate Beta spectrum draw")
    vals = 1.0 + 9.0 * (draws - lo) / (hi - lo)
    # pin the extremes; the affine map can be off by an ulp
    vals[np.argmin(draws)] = 1.0
    vals[np.argmax(draws)] = 10.0
    return vals


def build_covariance(
    spec: CovarianceSpec, d: int, rng: np.random.Generator | int | None = None
) -> CovarianceModel:
    """Construct the covariance model described by ``spec`` in dimension ``d``."""
    if d < 2:
        raise InvalidSpec("dimension d must be >= 2")
    rng = as_generator(rng)
    spike = None
    loadings = None
    delta = 0.0

    if spec.kind == "identity":
        sigma = np.eye(d)
        vals, vecs = np.ones(d), np.eye(d)
    elif spec.kind == "spiked":
        spike = spike_direction(spec, d, rng)
        delta = float(spec.delta)
        sigma = np.eye(d) + delta * np.outer(spike, spike)
        vals, vecs = _from_eigh(sigma)
    elif spec.kind == "spectrum":
        lam = spectrum_values(spec.spectrum, d, rng)
        q = haar_orthogonal(d, rng)
        sigma = _symmetrize((q * lam) @ q.T)
        vals, vecs = _sorted_pair(lam, q)
    elif spec.kind == "latent_iid":
        q = spec.latent_dim(d)
        scale = np.sqrt((10.0 - 1.0) / (np.sqrt(d) + np.sqrt(q)) ** 2)
        loadings = scale * rng.standard_normal((d, q))
        sigma = _symmetrize(np.eye(d) + loadings @ loadings.T)
        vals, vecs = _from_eigh(sigma)
    else:
        q = spec.latent_dim(d)
        left = haar_orthogonal(d, rng)
        right = haar_orthogonal(q, rng)
        loadings = (left[:, :q] * np.sqrt(spec.eig_value)) @ right.T
        sigma = _symmetrize(np.eye(d) + loadings @ loadings.T)
        lam = np.ones(d)
        lam[:q] += spec.eig_value
        vals, vecs = _sorted_pair(lam, left)

    if vals[-1] < -1e-8:
        raise NonPositiveDefinite(f"smallest eigenvalue {vals[-1]:.3e} < 0")
    for arr in (sigma, vals, vecs):
        arr.setflags(write=False)
    return CovarianceModel(
        d=d,
        sigma=sigma,
        eigenvalues=vals,
        eigenvectors=vecs,
        spec=spec,
        spike=spike,
        delta=delta,
        loadings=loadings,
    )


def masked_covariance(model: CovarianceModel | Array, p: float) -> Array:
    """Covariance of a Bernoulli(1-p) masked row: (1-p)^2 S + p(1-p) diag(S)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"masking ratio {p} outside [0, 1]")
    sigma = model.sigma if isinstance(model, CovarianceModel) else np.asarray(model, dtype=float)
    out = (1.0 - p) ** 2 * sigma
    out[np.diag_indices_from(out)] += p * (1.0 - p) * np.diag(sigma)
    return out


@dataclass(frozen=True)
class SignalSpec:
    """Descriptor for the ground-truth coefficient vector.

    ``eigenvector`` picks the eigenvector at spectrum ``quantile`` (1.0 is
    the largest eigenvalue, 0.0 the smallest). ``angle`` builds
    cos(theta) v + sin(theta) u against the spike direction. ``latent`` uses
    W (I + W^T W)^{-1} theta with uniform theta. ``uniform`` normalizes an
    iid U(0,1) draw. ``explicit`` uses ``values`` as given. ``norm``
    rescales every kind except ``latent`` and ``explicit``.
    """

    kind: str = "uniform"
    quantile: float = 1.0
    theta: float = 0.0
    values: tuple[float, ...] | None = None
    norm: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in SIGNAL_KINDS:
            raise InvalidSpec(f"unknown signal kind {self.kind!r}")
        if self.kind == "eigenvector" and not 0.0 <= self.quantile <= 1.0:
            raise InvalidSpec("quantile must lie in [0, 1]")
        if self.kind == "explicit" and self.values is None:
            raise InvalidSpec("explicit signal needs values")
        if not self.norm >= 0:
            raise InvalidSpec("norm must be >= 0")


@dataclass(frozen=True, eq=False)
class SignalVector:
    beta: Array
    r: float
    beta_unit: Array
    provenance: str
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def r2(self) -> float:
        return float(np.sum(self.beta * self.beta))


def signal_from_vector(beta: Array, provenance: str = "explicit", **info: Any) -> SignalVector:
    beta = np.asarray(beta, dtype=float).copy()
    r = float(np.linalg.norm(beta))
    unit = beta / r if r > 0 else np.zeros_like(beta)
    beta.setflags(write=False)
    unit.setflags(write=False)
    return SignalVector(beta=beta, r=r, beta_unit=unit, provenance=provenance, info=dict(info))


def eigen_index(quantile: float, d: int) -> int:
    """Descending-order index of the eigenvalue at the given spectrum quantile."""
    return int(round((1.0 - quantile) * (d - 1)))


def orthogonal_direction(v: Array, draw: Array) -> Array:
    """Normalized component of ``draw`` orthogonal to the unit vector ``v``."""
    u = draw - (draw @ v) * v
    norm = np.linalg.norm(u)
    if not norm > 1e-8 * np.linalg.norm(draw):
        raise InvalidSpec("draw is parallel to v; orthogonal component vanished")
    return u / norm


def make_signal(
    spec: SignalSpec, model: CovarianceModel, rng: np.random.Generator | int | None = None
) -> SignalVector:
    rng = as_generator(rng)
    d = model.d
    if spec.kind == "eigenvector":
        if model.eigenvectors is None:
            raise EigendecompositionUnavailable("model carries no eigendecomposition")
        idx = eigen_index(spec.quantile, d)
        vec = np.array(model.eigenvectors[:, idx])
        if vec.sum() < 0:
            vec = -vec
        return signal_from_vector(
            spec.norm * vec / np.linalg.norm(vec),
            "eigenvector",
            quantile=spec.quantile,
            index=idx,
            eigenvalue=float(model.eigenvalues[idx]),
        )
    if spec.kind == "angle":
        if model.spike is None:
            raise MissingSpike("angle signals need a spiked covariance model")
        u = orthogonal_direction(model.spike, rng.uniform(0.0, 1.0, size=d))
        beta = np.cos(spec.theta) * model.spike + np.sin(spec.theta) * u
        return signal_from_vector(spec.norm * beta, "angle", theta=spec.theta)
    if spec.kind == "latent":
        w = model.loadings
        if w is None:
            raise InvalidSpec("latent signals need a latent covariance model")
        q = w.shape[1]
        theta = rng.uniform(0.0, 1.0, size=q)
        coef = np.linalg.solve(np.eye(q) + w.T @ w, theta)
        return signal_from_vector(w @ coef, "latent", theta=theta)
    if spec.kind == "uniform":
        draw = rng.uniform(0.0, 1.0, size=d)
        return signal_from_vector(spec.norm * draw / np.linalg.norm(draw), "uniform")
    values = np.asarray(spec.values, dtype=float)
    if values.shape != (d,):
        raise InvalidSpec(f"explicit signal has shape {values.shape}, expected ({d},)")
    return signal_from_vector(values, "explicit")
