"""Exact finite-sample conditional risk of the masked ridgeless estimator.

Given the corrupted design and its mask, the masked entries of each target
row follow the Gaussian conditional law given the kept entries. That makes
both the conditional mean of the estimator and its conditional covariance
available in closed form (:func:`lemma1_bias_variance`); when the signal is
an eigenvector of the covariance the bias simplifies further
(:func:`theorem3_bias_variance`). :func:`mc_conditional_risk` redraws the
masked entries and the noise directly and is the brute-force check of both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covariance import Array, CovarianceModel, SignalVector
from .errors import EmptyTargetSet, NotAnEigenvector, SingularConditioning
from .estimator import pinv
from .metrics import exact_risk_batch
from .rng import as_generator
from .sampling import MaskedDataset


@dataclass(frozen=True, eq=False)
class ConditionalDecomposition:
    bias: float
    variance: float
    total: float
    u_vector: Array
    kept_sets: list[Array] = field(repr=False, default_factory=list)
    masked_sets: list[Array] = field(repr=False, default_factory=list)


@dataclass(frozen=True)
class _RowConditioning:
    kept: Array
    masked: Array
    u: float
    cond_var: float


def _row_conditioning(
    x_row: Array, keep: Array, model: CovarianceModel, beta: Array
) -> _RowConditioning:
    """Conditional mean shift and variance of x_masked . beta_masked for one row."""
    kept = np.flatnonzero(keep)
    masked = np.flatnonzero(~keep)
    if masked.size == 0:
        return _RowConditioning(kept, masked, 0.0, 0.0)
    b_m = beta[masked]
    if kept.size == 0:
        return _RowConditioning(kept, masked, 0.0, float(b_m @ model.sigma[np.ix_(masked, masked)] @ b_m))

    if model.kind == "spiked" and model.spike is not None:
        # Sherman-Morrison: Sigma_KK^{-1} = I - delta v_K v_K^T / (1 + delta |v_K|^2)
        v, delta = model.spike, model.delta
        v_k, v_m = v[kept], v[masked]
        scale = delta / (1.0 + delta * float(v_k @ v_k))
        vb = float(v_m @ b_m)
        u = scale * vb * float(x_row[kept] @ v_k)
        cond_var = float(b_m @ b_m) + scale * vb * vb
        return _RowConditioning(kept, masked, u, cond_var)

    sigma = model.sigma
    s_kk = sigma[np.ix_(kept, kept)]
    s_km = sigma[np.ix_(kept, masked)]
    try:
        coef = np.linalg.solve(s_kk, s_km @ b_m)
    except np.linalg.LinAlgError as exc:
        raise SingularConditioning(f"kept block of size {kept.size} is singular") from exc
    u = float(x_row[kept] @ coef)
    cond_var = float(b_m @ sigma[np.ix_(masked, masked)] @ b_m) - float((s_km @ b_m) @ coef)
    return _RowConditioning(kept, masked, u, cond_var)


def _conditioning(ds: MaskedDataset, model: CovarianceModel, beta: Array) -> list[_RowConditioning]:
    keep = ds.kept
    return [_row_conditioning(ds.X_tilde[a], keep[a], model, beta) for a in range(ds.n_targets)]


def _variance(
    pinv_x: Array, rows: list[_RowConditioning], model: CovarianceModel, sigma2: float
) -> float:
    # diag((X^T)^+ Sigma X^+) and its trace Tr((X^T X)^+ Sigma)
    m_diag = np.sum(pinv_x * (model.sigma @ pinv_x), axis=0)
    cond = np.array([r.cond_var for r in rows])
    return float(m_diag @ cond) + sigma2 * float(m_diag.sum())


def lemma1_bias_variance(
    ds: MaskedDataset,
    model: CovarianceModel,
    beta: SignalVector,
    sigma2: float | None = None,
) -> ConditionalDecomposition:
    """Conditional bias and variance of the ridgeless fit given X_tilde and Z."""
    sigma2 = ds.sigma2 if sigma2 is None else sigma2
    b = beta.beta
    xt = ds.X_tilde
    pinv_x = pinv(xt)
    rows = _conditioning(ds, model, b)
    u = np.array([r.u for r in rows])

    shift = pinv_x @ (xt @ b) - b + pinv_x @ u
    bias = max(model.quadratic(shift), 0.0)
    variance = _variance(pinv_x, rows, model, sigma2)
    return ConditionalDecomposition(
        bias=bias,
        variance=variance,
        total=bias + variance,
        u_vector=u,
        kept_sets=[r.kept for r in rows],
        masked_sets=[r.masked for r in rows],
    )


def theorem3_bias_variance(
    ds: MaskedDataset,
    model: CovarianceModel,
    beta: SignalVector,
    eta: float,
    sigma2: float | None = None,
) -> ConditionalDecomposition:
    """Conditional decomposition when beta is an eigenvector with eigenvalue eta."""
    b = beta.beta
    gap = np.linalg.norm(model.sigma @ b - eta * b)
    if gap > 1e-8 * abs(eta) * np.linalg.norm(b):
        raise NotAnEigenvector(f"|Sigma beta - eta beta| = {gap:.3e}")
    sigma2 = ds.sigma2 if sigma2 is None else sigma2
    xt = ds.X_tilde
    keep = ds.kept
    x_prime = np.zeros_like(xt)
    for a in range(ds.n_targets):
        kept = np.flatnonzero(keep[a])
        if kept.size == 0:
            continue
        s_kk = model.sigma[np.ix_(kept, kept)]
        try:
            x_prime[a, kept] = eta * np.linalg.solve(s_kk, xt[a, kept])
        except np.linalg.LinAlgError as exc:
            raise SingularConditioning(f"row {a}: kept block is singular") from exc

    pinv_x = pinv(xt)
    bias = max(model.quadratic(pinv_x @ (x_prime @ b) - b), 0.0)
    rows = _conditioning(ds, model, b)
    variance = _variance(pinv_x, rows, model, sigma2)
    return ConditionalDecomposition(
        bias=bias,
        variance=variance,
        total=bias + variance,
        u_vector=np.array([r.u for r in rows]),
        kept_sets=[r.kept for r in rows],
        masked_sets=[r.masked for r in rows],
    )


def _psd_factor(cov: Array) -> Array:
    """Lower factor L with L L^T = cov for a PSD matrix."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        if vals.min() < -1e-8 * max(1.0, vals.max()):
            raise SingularConditioning("conditional covariance is not PSD") from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def conditional_law(
    x_row: Array, keep: Array, sigma: Array
) -> tuple[Array, Array, Array, Array]:
    """(masked index, conditional mean, conditional covariance, kept index) of one row."""
    kept = np.flatnonzero(keep)
    masked = np.flatnonzero(~keep)
    s_mm = sigma[np.ix_(masked, masked)]
    if kept.size == 0:
        return masked, np.zeros(masked.size), s_mm, kept
    s_kk = sigma[np.ix_(kept, kept)]
    s_km = sigma[np.ix_(kept, masked)]
    try:
        gain = np.linalg.solve(s_kk, s_km)
    except np.linalg.LinAlgError as exc:
        raise SingularConditioning("kept block is singular") from exc
    mean = gain.T @ x_row[kept]
    cov = s_mm - s_km.T @ gain
    return masked, mean, 0.5 * (cov + cov.T), kept


def mc_conditional_risk(
    ds: MaskedDataset,
    model: CovarianceModel,
    beta: SignalVector,
    sigma2: float | None,
    n_draws: int,
    rng: np.random.Generator | int | None = None,
    *,
    chunk: int = 10_000,
) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of the conditional risk.

    X_tilde and Z stay fixed. Each draw resamples the masked entries of every
    target row from their Gaussian conditional law and the noise, refits on
    X_tilde and evaluates the exact risk.
    """
    if n_draws < 100:
        raise ValueError("n_draws must be >= 100")
    sigma2 = ds.sigma2 if sigma2 is None else sigma2
    rng = as_generator(rng)
    b = beta.beta
    xt = ds.X_tilde
    keep = ds.kept
    pinv_x = pinv(xt)
    n_t = ds.n_targets

    laws = []
    for a in range(n_t):
        masked, mean, cov, kept = conditional_law(xt[a], keep[a], model.sigma)
        factor = _psd_factor(cov) if masked.size else np.zeros((0, 0))
        laws.append((masked, mean, factor, float(xt[a, kept] @ b[kept])))

    risks = np.empty(n_draws)
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        y = np.empty((n_t, k))
        for a, (masked, mean, factor, kept_part) in enumerate(laws):
            if masked.size:
                g = rng.standard_normal((k, masked.size))
                x_m = mean + g @ factor.T
                y[a] = kept_part + x_m @ b[masked]
            else:
                y[a] = kept_part
        y += np.sqrt(sigma2) * rng.standard_normal((n_t, k))
        risks[done : done + k] = exact_risk_batch(pinv_x @ y, beta, model)
        done += k
    return float(risks.mean()), float(risks.std(ddof=1) / np.sqrt(n_draws))


@dataclass(frozen=True)
class OracleCheck:
    """One small instance: closed form vs Monte Carlo, plus the eigenvector shortcut."""

    index: int
    kind: str
    n: int
    d: int
    p: float
    closed_form: float
    mc_mean: float
    mc_se: float
    z: float
    eigen_bias_gap: float | None

    @property
    def within(self) -> bool:
        return abs(self.z) <= 3.0


def oracle_instance(index: int, master_seed: int = 0, n_draws: int = 100_000) -> OracleCheck:
    """Random small instance; kinds and ratios cycle with ``index``."""
    from .covariance import CovarianceSpec, SignalSpec, build_covariance, make_signal
    from .rng import DOMAIN_ORACLE, stream
    from .sampling import Fixed, apply_mask_scheme, generate_targets, sample_design

    kinds = (
        CovarianceSpec(kind="identity"),
        CovarianceSpec(kind="spiked", delta=10.0),
        CovarianceSpec(kind="spectrum", spectrum="uniform"),
    )
    spec = kinds[index % 3]
    p = (0.2, 0.5, 0.8)[(index // 3) % 3]
    rng = stream(master_seed, DOMAIN_ORACLE, index)
    d = int(rng.integers(10, 31))
    n = int(rng.integers(20, 61))
    model = build_covariance(spec, d, rng)
    eigen = index % 2 == 0
    signal = SignalSpec(kind="eigenvector", quantile=1.0) if eigen else SignalSpec(kind="uniform")
    beta = make_signal(signal, model, rng)
    sigma2 = 0.04
    X = sample_design(model, n, rng)
    y = generate_targets(X, beta, sigma2, rng)
    ds = None
    for _ in range(100):
        try:
            ds = apply_mask_scheme(X, y, Fixed(p), rng, sigma2=sigma2)
            break
        except EmptyTargetSet:
            continue
    if ds is None:
        raise SingularConditioning("could not draw a nonempty target set")

    exact = lemma1_bias_variance(ds, model, beta)
    mean, se = mc_conditional_risk(ds, model, beta, sigma2, n_draws, rng)
    gap = None
    if eigen or model.kind == "identity":
        eta = model.quadratic(beta.beta_unit)
        gap = abs(theorem3_bias_variance(ds, model, beta, eta).bias - exact.bias)
    z = (exact.total - mean) / se if se > 0 else 0.0
    return OracleCheck(index, model.kind, n, d, p, exact.total, mean, se, z, gap)


def oracle_suite(
    n_instances: int = 30, master_seed: int = 0, n_draws: int = 100_000
) -> list[OracleCheck]:
    return [oracle_instance(i, master_seed, n_draws) for i in range(n_instances)]
