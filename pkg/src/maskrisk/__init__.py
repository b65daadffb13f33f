"""Finite-sample and limiting risk of masked ridgeless regression."""

from __future__ import annotations

from .covariance import (
    CovarianceModel,
    CovarianceSpec,
    SignalSpec,
    SignalVector,
    build_covariance,
    make_signal,
    masked_covariance,
)
from .estimator import PseudoInverse, RidgeLimit, min_norm_fit
from .experiments import ExperimentConfig, SweepRow, figure_preset, r2mae_protocol, sweep_mask_ratio
from .metrics import effective_rank, exact_risk, magnitude_ratio, sample_risk
from .sampling import R2MAE, Fixed, apply_mask_scheme, sample_design
from .theory import TheoryParams, isotropic_risk, solve_fixed_point, spectral_risk, spiked_risk

__all__ = [
    "CovarianceModel",
    "CovarianceSpec",
    "ExperimentConfig",
    "Fixed",
    "PseudoInverse",
    "R2MAE",
    "RidgeLimit",
    "SignalSpec",
    "SignalVector",
    "SweepRow",
    "TheoryParams",
    "apply_mask_scheme",
    "build_covariance",
    "effective_rank",
    "exact_risk",
    "figure_preset",
    "isotropic_risk",
    "magnitude_ratio",
    "make_signal",
    "masked_covariance",
    "min_norm_fit",
    "r2mae_protocol",
    "sample_design",
    "sample_risk",
    "solve_fixed_point",
    "spectral_risk",
    "spiked_risk",
    "sweep_mask_ratio",
]
