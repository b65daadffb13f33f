"""Masking-ratio sweeps, theory overlays and the R2MAE comparison protocol."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .covariance import (
    Array,
    CovarianceModel,
    CovarianceSpec,
    SignalSpec,
    SignalVector,
    build_covariance,
    make_signal,
    orthogonal_direction,
    signal_from_vector,
)
from .errors import (
    AtPhaseTransition,
    BracketExhausted,
    EmptyTargetSet,
    InvalidSpec,
    NoSolution,
    TooManySkips,
    UnknownPreset,
)
from .estimator import FitMethod, PseudoInverse, RidgeLimit, min_norm_fit
from .metrics import effective_rank, exact_risk_batch, magnitude_ratio
from .rng import DOMAIN_CELL, DOMAIN_SETUP, DOMAIN_TEST, experiment_tag, stream
from .oracle import lemma1_bias_variance
from .sampling import Fixed, MaskedDataset, MaskScheme, R2MAE, draw_mask, sample_design
from .theory import (
    TheoryParams,
    isotropic_risk,
    spectral_measures,
    spectral_risk,
    spiked_risk,
    theory_for_model,
)

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
SEARCH_GRID = tuple(round(0.01 * k, 2) for k in range(100))


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep or protocol run.

    ``d`` wins over ``gamma`` when both are given. ``seeds`` lists the
    design seeds: each draws its own model, signal, design and noise.
    ``r2mae`` holds (p_min, p_max) ranges evaluated alongside ``p_grid``.
    """

    experiment_id: str
    covariance: CovarianceSpec = field(default_factory=CovarianceSpec)
    signal: SignalSpec = field(default_factory=SignalSpec)
    master_seed: int = 0
    seeds: tuple[int, ...] = (0,)
    n: int = 200
    d: int | None = None
    gamma: float | None = 5.0
    sigma2: float = 0.04
    p_grid: tuple[float, ...] = DEFAULT_GRID
    r2mae: tuple[tuple[float, float], ...] = ()
    reps: int = 50
    fit: str = "pinv"
    ridge_lambda: float = 1e-6
    theory_lambda_reg: float = 0.0
    n_test_factor: int = 10
    deterministic_subset: bool = False
    resample_noise_per_rep: bool = False
    use_sample_risk: bool = False
    emit_metrics: bool = False
    emit_decomposition: bool = False
    magnitude_design: str = "train"
    common_random_numbers: bool = True
    include_theory: bool = True

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise InvalidSpec("reps must be >= 1")
        if self.n < 2 or self.dim < 2:
            raise InvalidSpec("n and d must be >= 2")
        if not self.seeds:
            raise InvalidSpec("at least one seed is required")
        if any(not 0.0 <= p <= 1.0 for p in self.p_grid):
            raise InvalidSpec("p_grid values must lie in [0, 1]")
        for lo, hi in self.r2mae:
            R2MAE(lo, hi)
        if self.fit not in ("pinv", "ridge"):
            raise InvalidSpec(f"unknown fit method {self.fit!r}")
        if self.magnitude_design not in ("train", "fresh"):
            raise InvalidSpec("magnitude_design must be 'train' or 'fresh'")
        if self.sigma2 < 0:
            raise InvalidSpec("sigma2 must be >= 0")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise InvalidSpec("master_seed must be an unsigned 64-bit integer")

    @property
    def dim(self) -> int:
        if self.d is not None:
            return int(self.d)
        if self.gamma is None:
            raise InvalidSpec("either d or gamma must be set")
        return int(round(self.gamma * self.n))

    @property
    def aspect(self) -> float:
        return self.dim / self.n

    @property
    def fit_method(self) -> FitMethod:
        return RidgeLimit(self.ridge_lambda) if self.fit == "ridge" else PseudoInverse()

    def schemes(self) -> list[tuple[int, MaskScheme]]:
        """(stream slot, scheme) pairs: the fixed grid first, then R2MAE ranges."""
        out: list[tuple[int, MaskScheme]] = [(i, Fixed(p)) for i, p in enumerate(self.p_grid)]
        base = len(self.p_grid)
        out += [(base + j, R2MAE(lo, hi)) for j, (lo, hi) in enumerate(self.r2mae)]
        return out


@dataclass(frozen=True)
class SweepRow:
    """One (scheme, p, repetition) record.

    ``risk_normalized`` and ``theory_risk`` are relative to the null risk
    beta^T Sigma beta of the zero predictor, which is r^2 when Sigma = I.
    """

    experiment_id: str
    seed: int
    covariance_kind: str
    n: int
    d: int
    gamma: float
    sigma2: float
    scheme_tag: str
    p_min: float | None
    p_max: float | None
    rep: int | None
    n_targets: int
    risk: float
    risk_normalized: float
    bias: float | None = None
    variance: float | None = None
    erank: float | None = None
    magnitude_ratio: float | None = None
    theory_risk: float | None = None


@dataclass
class SeedContext:
    """Everything held fixed across the p-grid for one design seed."""

    config: ExperimentConfig
    seed: int
    model: CovarianceModel
    beta: SignalVector
    X: Array
    noise: Array
    null: float
    X_eval: Array | None = None
    pair: tuple[SignalVector, SignalVector] | None = None

    @property
    def y(self) -> Array:
        return self.X @ self.beta.beta + self.noise


@dataclass
class SweepResult:
    """Rows plus skip counts and, when requested, prediction magnitudes.

    ``magnitudes`` maps (seed, scheme_tag, p_min, p_max) to per-rep pairs
    (|X b0|^2, |X b1|^2), on the training design unless the config asks
    for fresh rows.
    """

    rows: list[SweepRow]
    skips: dict[tuple[int, str, float, float], int] = field(default_factory=dict)
    magnitudes: dict[tuple[int, str, float, float], list[tuple[float, float]]] = field(
        default_factory=dict
    )

    def magnitude_curve(self) -> dict[tuple[int, str, float, float], float]:
        """Ratio of mean magnitudes E|X b0|^2 / E|X b1|^2 per seed and scheme."""
        out = {}
        for key, pairs in self.magnitudes.items():
            num = sum(a for a, _ in pairs)
            den = sum(b for _, b in pairs)
            out[key] = num / den if den > 0 else float("nan")
        return out


def setup_seed(config: ExperimentConfig, seed: int) -> SeedContext:
    tag = experiment_tag(config.experiment_id)
    rng = stream(config.master_seed, tag, seed, DOMAIN_SETUP)
    model = build_covariance(config.covariance, config.dim, rng)
    beta = make_signal(config.signal, model, rng)
    X = sample_design(model, config.n, rng)
    noise = math.sqrt(config.sigma2) * rng.standard_normal(config.n)
    null = model.quadratic(beta.beta)
    ctx = SeedContext(config, seed, model, beta, X, noise, null)

    if config.emit_metrics and model.spike is not None:
        u = orthogonal_direction(model.spike, rng.uniform(0.0, 1.0, size=model.d))
        ctx.pair = (
            signal_from_vector(u, "angle", theta=math.pi / 2),
            signal_from_vector(model.spike, "angle", theta=0.0),
        )
    if config.use_sample_risk or (ctx.pair is not None and config.magnitude_design == "fresh"):
        test_rng = stream(config.master_seed, tag, seed, DOMAIN_TEST)
        ctx.X_eval = sample_design(model, config.n_test_factor * config.n, test_rng)
    return ctx


def cell_stream(config: ExperimentConfig, seed: int, slot: int, rep: int) -> np.random.Generator:
    """Mask stream for one cell.

    With common random numbers (the default) the stream ignores the scheme
    slot, so every masking ratio sees the same uniforms at a given rep and
    Fixed(p) coincides bitwise with R2MAE(p, p).
    """
    tag = experiment_tag(config.experiment_id)
    if config.common_random_numbers:
        return stream(config.master_seed, tag, seed, DOMAIN_CELL, rep)
    return stream(config.master_seed, tag, seed, DOMAIN_CELL, slot + 1, rep)


def _risk(ctx: SeedContext, beta_hat: Array, beta: SignalVector) -> float:
    if ctx.config.use_sample_risk:
        gap = ctx.X_eval @ (beta_hat - beta.beta)
        return float(np.mean(gap * gap))
    return float(exact_risk_batch(beta_hat[:, None], beta, ctx.model)[0])


@dataclass(frozen=True)
class CellOutcome:
    n_targets: int
    risk: float
    erank: float | None = None
    ratio: float | None = None
    magnitudes: tuple[float, float] | None = None
    bias: float | None = None
    variance: float | None = None


def run_cell(ctx: SeedContext, scheme: MaskScheme, slot: int, rep: int) -> CellOutcome:
    """Mask, fit and score one (scheme, rep) cell; raises EmptyTargetSet."""
    cfg = ctx.config
    rng = cell_stream(cfg, ctx.seed, slot, rep)
    selected, keep, _ = draw_mask(cfg.n, cfg.dim, scheme, rng, cfg.deterministic_subset)
    x_t = ctx.X[selected] * keep
    noise = ctx.noise
    if cfg.resample_noise_per_rep:
        noise = math.sqrt(cfg.sigma2) * rng.standard_normal(cfg.n)

    targets = [ctx.beta] + (list(ctx.pair) if ctx.pair else [])
    y = np.stack([ctx.X[selected] @ b.beta + noise[selected] for b in targets], axis=1)
    fits = min_norm_fit(x_t, y, cfg.fit_method)
    risk = _risk(ctx, fits[:, 0], ctx.beta)

    erank = ratio = mags = None
    if cfg.emit_metrics:
        erank = effective_rank(x_t) if np.any(x_t) else None
        if ctx.pair is not None:
            design = ctx.X if cfg.magnitude_design == "train" else ctx.X_eval
            mags = (
                float(np.sum((design @ fits[:, 1]) ** 2)),
                float(np.sum((design @ fits[:, 2]) ** 2)),
            )
            try:
                ratio = magnitude_ratio(design, fits[:, 1], fits[:, 2])
            except ZeroDivisionError:
                ratio = None
    bias = variance = None
    if cfg.emit_decomposition:
        ds = MaskedDataset(
            X=ctx.X, y=y[:, 0], selected=selected, X_tilde=x_t, y_tilde=y[:, 0], Z=keep,
            row_ratios=np.full(selected.size, np.nan), sigma2=cfg.sigma2,
        )
        parts = lemma1_bias_variance(ds, ctx.model, ctx.beta)
        bias, variance = parts.bias, parts.variance
    return CellOutcome(int(selected.size), risk, erank, ratio, mags, bias, variance)


def _theory(ctx: SeedContext, p: float) -> float | None:
    cfg = ctx.config
    if not cfg.include_theory or not 0.0 < p < 1.0:
        return None
    if ctx.beta.r2 == 0:
        return None
    params = TheoryParams.from_sizes(p, cfg.n, cfg.dim, cfg.sigma2 / ctx.beta.r2)
    value = theory_for_model(ctx.model, ctx.beta, params, cfg.theory_lambda_reg)
    if value is None:
        return None
    return value * ctx.beta.r2 / ctx.null


def _null_row(ctx: SeedContext) -> SweepRow:
    cfg = ctx.config
    return SweepRow(
        experiment_id=cfg.experiment_id,
        seed=ctx.seed,
        covariance_kind=cfg.covariance.kind,
        n=cfg.n,
        d=cfg.dim,
        gamma=cfg.aspect,
        sigma2=cfg.sigma2,
        scheme_tag="null",
        p_min=None,
        p_max=None,
        rep=None,
        n_targets=cfg.n,
        risk=ctx.null,
        risk_normalized=ctx.null / ctx.null,
    )


def _map(fn, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sweep_mask_ratio(config: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Evaluate every (seed, scheme, rep) cell and attach theory per masking ratio.

    Rows come out in canonical order (seed, scheme slot, rep), preceded per
    seed by a null-predictor sanity row, regardless of ``threads``.
    """
    rows: list[SweepRow] = []
    skips: dict[tuple[int, str, float, float], int] = {}
    magnitudes: dict[tuple[int, str, float, float], list[tuple[float, float]]] = {}
    schemes = config.schemes()

    for seed in config.seeds:
        ctx = setup_seed(config, seed)
        log.info("%s seed=%d: d=%d n=%d", config.experiment_id, seed, config.dim, config.n)
        theory = {
            slot: _theory(ctx, s.p) for slot, s in schemes if isinstance(s, Fixed)
        }
        tasks = [(slot, s, rep) for slot, s in schemes for rep in range(config.reps)]

        def work(task):
            slot, scheme, rep = task
            try:
                return run_cell(ctx, scheme, slot, rep)
            except EmptyTargetSet:
                return None

        outcomes = _map(work, tasks, threads)
        rows.append(_null_row(ctx))
        missed: dict[int, int] = defaultdict(int)
        for (slot, scheme, rep), out in zip(tasks, outcomes):
            lo, hi = scheme.bounds
            if out is None:
                missed[slot] += 1
                continue
            if out.magnitudes is not None:
                magnitudes.setdefault((seed, scheme.tag, lo, hi), []).append(out.magnitudes)
            rows.append(
                SweepRow(
                    experiment_id=config.experiment_id,
                    seed=seed,
                    covariance_kind=config.covariance.kind,
                    n=config.n,
                    d=config.dim,
                    gamma=config.aspect,
                    sigma2=config.sigma2,
                    scheme_tag=scheme.tag,
                    p_min=lo,
                    p_max=hi,
                    rep=rep,
                    n_targets=out.n_targets,
                    risk=out.risk,
                    risk_normalized=out.risk / ctx.null,
                    bias=out.bias,
                    variance=out.variance,
                    erank=out.erank,
                    magnitude_ratio=out.ratio,
                    theory_risk=theory.get(slot),
                )
            )
        for slot, scheme in schemes:
            count = missed.get(slot, 0)
            if not count:
                continue
            lo, hi = scheme.bounds
            skips[(seed, scheme.tag, lo, hi)] = count
            if count > 0.5 * config.reps:
                raise TooManySkips(
                    f"{config.experiment_id} seed={seed} {scheme.tag}({lo}, {hi}): "
                    f"{count}/{config.reps} repetitions had no targets"
                )
    return SweepResult(rows=rows, skips=skips, magnitudes=magnitudes)


def mean_normalized_risk(
    ctx: SeedContext, scheme: MaskScheme, slot: int, threads: int = 1
) -> float:
    """Mean null-relative risk over reps; an empty target set scores as the null fit."""

    def work(rep: int) -> float:
        try:
            return run_cell(ctx, scheme, slot, rep).risk / ctx.null
        except EmptyTargetSet:
            return 1.0

    return float(np.mean(_map(work, range(ctx.config.reps), threads)))


@dataclass(frozen=True)
class ComparisonRow:
    experiment_id: str
    seed: int
    covariance_kind: str
    best_p: float
    min_risk: float
    mid_p: float
    mid_risk: float
    p_min: float
    p_max: float
    r2mae_risk: float


def r2mae_protocol(config: ExperimentConfig, threads: int = 1) -> list[ComparisonRow]:
    """Best fixed ratio, mid-range fixed ratio and R2MAE, one row per seed."""
    if len(config.r2mae) != 1:
        raise InvalidSpec("the comparison protocol needs exactly one R2MAE range")
    lo, hi = config.r2mae[0]
    mid = 0.5 * (lo + hi)
    rows = []
    for seed in config.seeds:
        ctx = setup_seed(config, seed)
        grid = {p: mean_normalized_risk(ctx, Fixed(p), i, threads) for i, p in enumerate(config.p_grid)}
        best_p = min(grid, key=lambda p: (grid[p], p))
        base = len(config.p_grid)
        mid_risk = mean_normalized_risk(ctx, Fixed(mid), base + 1, threads)
        r2_risk = mean_normalized_risk(ctx, R2MAE(lo, hi), base, threads)
        log.info(
            "%s seed=%d best=%.2f (%.4f) mid=%.4f r2mae=%.4f",
            config.experiment_id, seed, best_p, grid[best_p], mid_risk, r2_risk,
        )
        rows.append(
            ComparisonRow(
                experiment_id=config.experiment_id,
                seed=seed,
                covariance_kind=config.covariance.kind,
                best_p=best_p,
                min_risk=grid[best_p],
                mid_p=mid,
                mid_risk=mid_risk,
                p_min=lo,
                p_max=hi,
                r2mae_risk=r2_risk,
            )
        )
    return rows


def with_seed(config: ExperimentConfig, master_seed: int) -> ExperimentConfig:
    return replace(config, master_seed=master_seed)


PRESET_IDS = ("fig1a", "fig1b", "fig1c", "fig1d", "fig1e", "fig1g", "fig3", "table5", "table9")
TABLE_SEEDS = (2, 12, 22, 32, 42)
DELTAS = (1.0, 10.0, 100.0)


def _cos_tag(cos: float) -> str:
    return f"cos{cos:g}"


def _angle(cos: float) -> SignalSpec:
    return SignalSpec(kind="angle", theta=math.acos(cos))


def _spiked_family(prefix: str, spike: str, cosines: tuple[float, ...], **extra) -> list[ExperimentConfig]:
    return [
        ExperimentConfig(
            experiment_id=f"{prefix}_delta{delta:g}_{_cos_tag(c)}",
            covariance=CovarianceSpec(kind="spiked", delta=delta, spike=spike),
            signal=_angle(c),
            n=200,
            gamma=5.0,
            **extra,
        )
        for delta in DELTAS
        for c in cosines
    ]


def _table(prefix: str, quantile: float, lo: float, hi: float) -> list[ExperimentConfig]:
    families = {
        "beta": CovarianceSpec(kind="spectrum", spectrum="beta"),
        "latent": CovarianceSpec(kind="latent_iid", q_ratio=0.5),
    }
    return [
        ExperimentConfig(
            experiment_id=f"{prefix}_{name}",
            covariance=cov,
            signal=SignalSpec(kind="eigenvector", quantile=quantile),
            seeds=TABLE_SEEDS,
            n=200,
            gamma=5.0,
            p_grid=SEARCH_GRID,
            r2mae=((lo, hi),),
            fit="ridge",
            include_theory=False,
        )
        for name, cov in families.items()
    ]


def figure_preset(preset_id: str) -> list[ExperimentConfig]:
    """Fully populated configs for one figure or table."""
    if preset_id == "fig1a":
        return [
            ExperimentConfig(experiment_id="fig1a_over", n=2000, d=10000, gamma=None),
            ExperimentConfig(experiment_id="fig1a_under", n=4000, d=2000, gamma=None),
        ]
    if preset_id == "fig1b":
        return [
            ExperimentConfig(
                experiment_id=f"fig1b_{_cos_tag(c)}",
                covariance=CovarianceSpec(kind="spiked", delta=10.0, spike="uniform"),
                signal=_angle(c),
                n=200,
                gamma=5.0,
                theory_lambda_reg=1e-8,
            )
            for c in (0.0, 0.5, 1.0)
        ]
    if preset_id == "fig1c":
        return _spiked_family("fig1c", "uniform", (0.0, 1.0))
    if preset_id == "fig1d":
        return _spiked_family("fig1d", "uniform", (1.0,), emit_metrics=True)
    if preset_id == "fig3":
        return _spiked_family("fig3", "ones", (0.0, 1.0), emit_metrics=True)
    if preset_id == "fig1e":
        families = {
            "uniform": CovarianceSpec(kind="spectrum", spectrum="uniform"),
            "beta": CovarianceSpec(kind="spectrum", spectrum="beta"),
            "latent": CovarianceSpec(kind="latent_iid", q_ratio=0.5),
        }
        return [
            ExperimentConfig(
                experiment_id=f"fig1e_{name}_q{q:g}",
                covariance=cov,
                signal=SignalSpec(kind="eigenvector", quantile=q),
                n=500,
                d=2500,
                gamma=None,
                fit="ridge",
                include_theory=False,
            )
            for name, cov in families.items()
            for q in (1.0, 0.9, 0.5, 0.1)
        ]
    if preset_id == "fig1g":
        return [
            ExperimentConfig(
                experiment_id="fig1g",
                covariance=CovarianceSpec(kind="latent_structured", q=50, eig_value=100.0),
                signal=SignalSpec(kind="latent"),
                n=100,
                d=5000,
                gamma=None,
                fit="ridge",
                include_theory=False,
                emit_metrics=True,
            )
        ]
    if preset_id == "table5":
        return _table("table5", 1.0, 0.5, 0.6)
    if preset_id == "table9":
        return _table("table9", 0.9, 0.4, 0.5)
    raise UnknownPreset(f"unknown preset {preset_id!r}; choose from {', '.join(PRESET_IDS)}")


@dataclass(frozen=True)
class TheoryRow:
    experiment_id: str
    seed: int
    covariance_kind: str
    n: int
    d: int
    gamma: float
    kappa: float
    p: float
    method: str
    bias: float
    variance: float
    total: float
    lambda_star: float | None = None


def _isotropic_split(params: TheoryParams) -> tuple[float, float]:
    p, gamma, kappa = params.p, params.gamma, params.kappa
    total = isotropic_risk(params)
    bias = 1.0 - p / gamma if gamma > p else 0.0
    return bias, total - bias


def theory_curve(config: ExperimentConfig) -> list[TheoryRow]:
    """Limiting risk over ``p_grid``; one row per applicable calculator.

    Identity models use the closed form. Spiked models get both the
    resolvent and the spectral-measure evaluation on the seed's draw of
    (v, beta). Grid points at the phase transition, or without a positive
    fixed point, are skipped.
    """
    rows: list[TheoryRow] = []
    kind = config.covariance.kind
    if kind not in ("identity", "spiked"):
        raise InvalidSpec(f"no closed-form theory for covariance kind {kind!r}")
    for seed in config.seeds:
        ctx = setup_seed(config, seed) if kind == "spiked" else None
        r2 = ctx.beta.r2 if ctx else float(config.signal.norm) ** 2
        kappa = config.sigma2 / r2
        base = dict(
            experiment_id=config.experiment_id,
            seed=seed,
            covariance_kind=kind,
            n=config.n,
            d=config.dim,
            gamma=config.aspect,
            kappa=kappa,
        )
        for p in config.p_grid:
            if not 0.0 < p < 1.0:
                continue
            if kind == "identity":
                params = TheoryParams(p=p, gamma=config.aspect, kappa=kappa)
                try:
                    bias, var = _isotropic_split(params)
                except AtPhaseTransition:
                    log.info("%s: p=%g sits on the phase transition", config.experiment_id, p)
                    continue
                rows.append(TheoryRow(**base, p=p, method="isotropic", bias=bias, variance=var, total=bias + var))
                continue
            params = TheoryParams.from_sizes(p, config.n, config.dim, kappa)
            model, beta = ctx.model, ctx.beta
            try:
                res = spiked_risk(model.delta, model.spike, beta, params, config.theory_lambda_reg)
                measures = spectral_measures(model.sigma, model.spike, beta, p)
                alt = spectral_risk(
                    measures, model.delta, float(model.spike @ beta.beta_unit), params,
                    config.theory_lambda_reg,
                )
            except (NoSolution, BracketExhausted) as exc:
                log.info("%s: p=%g skipped (%s)", config.experiment_id, p, exc)
                continue
            for name, r in (("resolvent", res), ("spectral", alt)):
                rows.append(
                    TheoryRow(**base, p=p, method=name, bias=r.bias, variance=r.variance,
                              total=r.total, lambda_star=r.lambda_star)
                )
    return rows
