"""Limiting risk of masked ridgeless regression.

Three calculators share one fixed-point solver:

* :func:`isotropic_risk` is the closed form for Sigma = I;
* :func:`spiked_risk` evaluates the spiked-model limit through the
  resolvent of the masked covariance;
* :func:`spectral_risk` evaluates the same limit as finite sums against the
  point-mass spectral measures of the masked covariance.

The last two are written independently and must agree to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import Array, CovarianceModel, SignalVector, masked_covariance
from .errors import AtPhaseTransition, BracketExhausted, InvalidSpec, NoSolution

BRACKET = (1e-14, 1e14)


@dataclass(frozen=True)
class TheoryParams:
    """Masking ratio, aspect ratio gamma = d/n and kappa = sigma^2 / r^2.

    ``n_tilde`` is the effective sample count fed to the fixed-point
    equation. When it is unset it defaults to d * p / gamma (an exact
    proportional limit); :meth:`from_sizes` rounds n * p instead.
    """

    p: float
    gamma: float
    kappa: float = 0.0
    n: int | None = None
    d: int | None = None
    n_tilde: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise InvalidSpec(f"p={self.p} must lie in (0, 1)")
        if not self.gamma > 0:
            raise InvalidSpec("gamma must be positive")
        if not self.kappa >= 0:
            raise InvalidSpec("kappa must be >= 0")

    @classmethod
    def from_sizes(cls, p: float, n: int, d: int, kappa: float = 0.0) -> TheoryParams:
        return cls(p=p, gamma=d / n, kappa=kappa, n=n, d=d, n_tilde=float(round(n * p)))

    def effective_samples(self, d: int) -> float:
        if self.n_tilde is not None:
            return float(self.n_tilde)
        return d * self.p / self.gamma


@dataclass(frozen=True)
class TheoryResult:
    bias: float
    variance: float
    total: float
    lambda_star: float = float("nan")
    c: float = float("nan")
    phi_beta: float = float("nan")
    phi_v: float = float("nan")
    psi: float = float("nan")
    u: float = float("nan")


@dataclass(frozen=True)
class SpectralMeasures:
    """Point masses of the masked covariance spectrum and two directions.

    ``tilde_eigs[i]`` carries weight 1/d in the spectral distribution,
    ``proj_beta[i]**2`` in the signal measure, ``proj_v[i]**2`` in the spike
    measure and ``proj_beta[i] * proj_v[i]`` in the signed cross measure.
    """

    tilde_eigs: Array
    proj_beta: Array
    proj_v: Array

    @property
    def d(self) -> int:
        return int(self.tilde_eigs.size)


def isotropic_risk(params: TheoryParams) -> float:
    """Normalized limiting risk for Sigma = I."""
    p, gamma, kappa = params.p, params.gamma, params.kappa
    if abs(gamma - p) <= 1e-9:
        raise AtPhaseTransition(f"gamma={gamma} coincides with p={p}")
    if gamma < p:
        return (p + kappa) * gamma / ((1.0 - p) * (p - gamma))
    return 1.0 - p / gamma + p * (p + kappa) / ((1.0 - p) * (gamma - p))


def fixed_point_residual(
    lam: float, tilde_eigs: Array, n_tilde: float, lambda_reg: float = 0.0
) -> float:
    """Tr(S (S + lam I)^{-1}) - (n_tilde - lambda_reg / lam); decreasing in lam."""
    return float(np.sum(tilde_eigs / (tilde_eigs + lam))) - n_tilde + lambda_reg / lam


def solve_fixed_point(
    tilde_eigs: Array,
    n_tilde: float,
    lambda_reg: float = 0.0,
    *,
    rtol: float = 1e-10,
    max_iter: int = 500,
) -> float:
    """Root of n_tilde - lambda_reg / lam = sum_i s_i / (s_i + lam).

    Bisection on log(lam) over [1e-14, 1e14], run to full precision. ``lambda_reg`` is the guard
    in the n_tilde - lambda_reg / lam form; it equals lam_ridge * n_tilde
    for a ridge penalty lam_ridge on the unnormalized Gram matrix.
    """
    eigs = np.asarray(tilde_eigs, dtype=float)
    if np.any(eigs < 0):
        raise InvalidSpec("masked covariance eigenvalues must be >= 0")
    if lambda_reg < 0:
        raise InvalidSpec("lambda_reg must be >= 0")
    if lambda_reg == 0 and n_tilde >= eigs.size:
        raise NoSolution(f"n_tilde={n_tilde} >= d={eigs.size}: no positive root without a guard")

    tol = rtol * n_tilde
    lo, hi = math.log(BRACKET[0]), math.log(BRACKET[1])
    f_lo = fixed_point_residual(BRACKET[0], eigs, n_tilde, lambda_reg)
    f_hi = fixed_point_residual(BRACKET[1], eigs, n_tilde, lambda_reg)
    if f_lo < 0 or f_hi > 0:
        raise BracketExhausted(f"residual does not change sign on {BRACKET} ({f_lo:.3e}, {f_hi:.3e})")

    # bisect until the log-bracket collapses; the residual tolerance is the acceptance test
    best_lam, best_res = math.nan, math.inf
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        lam = math.exp(mid)
        res = fixed_point_residual(lam, eigs, n_tilde, lambda_reg)
        if abs(res) < abs(best_res):
            best_lam, best_res = lam, res
        if res == 0.0:
            break
        if res > 0:
            lo = mid
        else:
            hi = mid
    if abs(best_res) <= tol:
        return best_lam
    raise BracketExhausted(f"bisection stalled with residual {best_res:.3e}")


def _spiked_sigma(delta: float, v: Array) -> Array:
    d = v.size
    return np.eye(d) + delta * np.outer(v, v)


def spiked_risk(
    delta: float,
    v: Array,
    beta: SignalVector | Array,
    params: TheoryParams,
    lambda_reg: float = 0.0,
) -> TheoryResult:
    """Normalized limiting bias and variance for Sigma = I + delta v v^T."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise InvalidSpec("spike direction must have unit norm")
    b = beta.beta_unit if isinstance(beta, SignalVector) else np.asarray(beta) / np.linalg.norm(beta)
    p, kappa = params.p, params.kappa
    d = v.size
    n_tilde = params.effective_samples(d)

    sigma = _spiked_sigma(delta, v)
    sigma_t = masked_covariance(sigma, p)
    s, chi = np.linalg.eigh(sigma_t)
    s = np.clip(s, 0.0, None)
    lam = solve_fixed_point(s, n_tilde, lambda_reg)

    resolvent = 1.0 / (lam + s)
    cb, cv = chi.T @ b, chi.T @ v
    phi_beta = lam * float(np.sum(cb * resolvent * cb))
    phi_v = lam * float(np.sum(cv * resolvent * cv))
    psi = lam * float(np.sum(cb * resolvent * cv))

    vb = float(v @ b)
    c = p * delta * vb / (1.0 + delta * (1.0 - p))
    # diagonal of Sigma in the eigenbasis of the masked covariance
    sigma_in_basis = np.sum(chi * (sigma @ chi), axis=0)
    num = float(np.sum(sigma_in_basis * s * resolvent**2))
    den = n_tilde - float(np.sum((s * resolvent) ** 2))
    u = num / den

    bias = phi_beta + c * c * (1.0 - phi_v) + delta * (c * (1.0 - phi_v) - psi) ** 2
    variance = u * (kappa + p + c * p * vb)
    return TheoryResult(
        bias=bias,
        variance=variance,
        total=bias + variance,
        lambda_star=lam,
        c=c,
        phi_beta=phi_beta,
        phi_v=phi_v,
        psi=psi,
        u=u,
    )


def spectral_measures(
    sigma: CovarianceModel | Array, v: Array, beta: SignalVector | Array, p: float
) -> SpectralMeasures:
    """Decompose the masked covariance and project the signal and spike on it."""
    sigma_t = masked_covariance(sigma, p)
    s, chi = np.linalg.eigh(sigma_t)
    order = np.argsort(s, kind="stable")[::-1]
    s, chi = np.clip(s[order], 0.0, None), chi[:, order]
    b = beta.beta_unit if isinstance(beta, SignalVector) else np.asarray(beta) / np.linalg.norm(beta)
    return SpectralMeasures(tilde_eigs=s, proj_beta=chi.T @ b, proj_v=chi.T @ np.asarray(v, dtype=float))


def spectral_risk(
    measures: SpectralMeasures,
    delta: float,
    v_dot_beta: float,
    params: TheoryParams,
    lambda_reg: float = 0.0,
) -> TheoryResult:
    """Predicted bias and variance as sums over the spectral point masses."""
    s = measures.tilde_eigs
    gb, gv = measures.proj_beta, measures.proj_v
    d = measures.d
    p, kappa = params.p, params.kappa
    n_tilde = params.effective_samples(d)

    mu = solve_fixed_point(s, n_tilde, lambda_reg)
    shrink = mu / (s + mu)
    keep = s / (s + mu)
    w_bb, w_bv, w_vv = gb * gb, gb * gv, gv * gv

    int_bb = float(np.sum(w_bb * shrink))
    int_bv = float(np.sum(w_bv * shrink))
    int_vv = float(np.sum(w_vv * keep))
    c = p * delta * v_dot_beta / (1.0 + delta * (1.0 - p))
    bias = int_bb + c * c * int_vv + delta * (-int_bv + c * int_vv) ** 2

    # the spectral distribution weighs each mass by 1/d; the spike measure
    # has unit total mass, so its contribution is rescaled by 1/d as well
    second = s / (s + mu) ** 2
    numer = float(np.sum(second)) / d + delta * float(np.sum(w_vv * second)) / d
    denom = n_tilde / d - float(np.sum((s / (s + mu)) ** 2)) / d
    prefactor = kappa + p + p * p * delta * v_dot_beta**2 / (1.0 + delta * (1.0 - p))
    variance = prefactor * numer / denom
    return TheoryResult(
        bias=bias,
        variance=variance,
        total=bias + variance,
        lambda_star=mu,
        c=c,
        phi_beta=int_bb,
        phi_v=1.0 - int_vv,
        psi=int_bv,
        u=numer / denom,
    )


def theory_for_model(
    model: CovarianceModel,
    beta: SignalVector,
    params: TheoryParams,
    lambda_reg: float = 0.0,
) -> float | None:
    """Normalized theory risk for identity and spiked models, else None."""
    if model.kind == "identity":
        try:
            return isotropic_risk(params)
        except AtPhaseTransition:
            return None
    if model.kind == "spiked" and model.spike is not None:
        try:
            return spiked_risk(model.delta, model.spike, beta, params, lambda_reg).total
        except (NoSolution, BracketExhausted):
            return None
    return None
