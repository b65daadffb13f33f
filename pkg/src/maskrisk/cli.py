"""Command-line entry point: ``maskrisk <subcommand> [flags]``.

Exit codes: 0 success, 1 invalid config, 2 numerical failure, 3 oracle check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvalidSpec, MaskRiskError, UnknownPreset
from .experiments import (
    PRESET_IDS,
    ExperimentConfig,
    figure_preset,
    r2mae_protocol,
    sweep_mask_ratio,
    theory_curve,
)
from .oracle import oracle_suite
from .tables import (
    SWEEP_COLUMNS,
    config_to_dict,
    csv_text,
    dump_configs,
    load_configs,
    rows_to_json,
)

log = logging.getLogger("maskrisk")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


@dataclass
class RunManifest:
    version: str
    command: str
    configs: list[dict[str, Any]]
    master_seed: int | None
    started: str
    finished: str = ""
    rows: int = 0
    skips: dict[str, int] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1) + "\n"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _seed_override(args: argparse.Namespace) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MASKRISK_SEED")
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise InvalidSpec(f"MASKRISK_SEED={env!r} is not an integer") from exc
    return None


def _configs(args: argparse.Namespace) -> list[ExperimentConfig]:
    if not args.config:
        raise InvalidSpec("--config is required")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidSpec(f"cannot read {args.config}: {exc}") from exc
    configs = load_configs(text)
    seed = _seed_override(args)
    if seed is not None:
        configs = [replace(c, master_seed=seed) for c in configs]
    return configs


def _render(rows: Sequence[Any], fmt: str, columns: Sequence[str] | None = None) -> str:
    if fmt == "json":
        return rows_to_json(rows)
    return csv_text(rows, columns)


def _write(text: str, out: str | None) -> list[str]:
    if out is None:
        sys.stdout.write(text)
        return []
    Path(out).write_text(text, encoding="utf-8", newline="")
    return [out]


def _finish(manifest: RunManifest, text: str, args: argparse.Namespace, rows: int) -> None:
    manifest.outputs = _write(text, args.out)
    manifest.rows = rows
    manifest.finished = _now()
    if args.out is not None:
        path = args.out + ".manifest.json"
        Path(path).write_text(manifest.to_json(), encoding="utf-8")


def _manifest(args: argparse.Namespace, configs: Sequence[ExperimentConfig]) -> RunManifest:
    return RunManifest(
        version=_version(),
        command=args.command,
        configs=[config_to_dict(c) for c in configs],
        master_seed=configs[0].master_seed if configs else None,
        started=_now(),
    )


def _run_sweeps(configs: Sequence[ExperimentConfig], args: argparse.Namespace) -> None:
    manifest = _manifest(args, configs)
    rows = []
    for cfg in configs:
        log.info("simulate %s (%d seeds, %d reps)", cfg.experiment_id, len(cfg.seeds), cfg.reps)
        result = sweep_mask_ratio(cfg, threads=args.threads)
        rows.extend(result.rows)
        for (seed, tag, lo, hi), count in result.skips.items():
            manifest.skips[f"{cfg.experiment_id}/{seed}/{tag}/{lo:g}-{hi:g}"] = count
    _finish(manifest, _render(rows, args.format, SWEEP_COLUMNS), args, len(rows))


def _run_protocols(configs: Sequence[ExperimentConfig], args: argparse.Namespace) -> None:
    manifest = _manifest(args, configs)
    rows = []
    for cfg in configs:
        log.info("r2mae %s (%d seeds)", cfg.experiment_id, len(cfg.seeds))
        rows.extend(r2mae_protocol(cfg, threads=args.threads))
    _finish(manifest, _render(rows, args.format), args, len(rows))


def cmd_theory(args: argparse.Namespace) -> int:
    configs = _configs(args)
    manifest = _manifest(args, configs)
    rows = []
    for cfg in configs:
        log.info("theory %s", cfg.experiment_id)
        rows.extend(theory_curve(cfg))
    if not rows:
        raise InvalidSpec("no grid point admits a theory value")
    _finish(manifest, _render(rows, args.format), args, len(rows))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    _run_sweeps(_configs(args), args)
    return EXIT_OK


def cmd_r2mae(args: argparse.Namespace) -> int:
    _run_protocols(_configs(args), args)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    seed = _seed_override(args) or 0
    checks = oracle_suite(args.instances, seed, args.draws)
    lines = []
    for c in checks:
        status = "PASS" if c.within else "FAIL"
        lines.append(
            f"{status} instance={c.index} kind={c.kind} n={c.n} d={c.d} p={c.p:g} "
            f"closed_form={c.closed_form:.6g} mc={c.mc_mean:.6g}+-{c.mc_se:.2g} z={c.z:+.2f}"
        )
    within = sum(c.within for c in checks)
    need = int(np.ceil(len(checks) * 28 / 30))
    gaps = [c.eigen_bias_gap for c in checks if c.eigen_bias_gap is not None]
    gap_ok = all(g <= 1e-8 for g in gaps)
    ok = within >= need and gap_ok
    lines.append(f"{'PASS' if within >= need else 'FAIL'} closed form within 3 SE: {within}/{len(checks)} (need {need})")
    lines.append(
        f"{'PASS' if gap_ok else 'FAIL'} eigenvector bias shortcut: max gap "
        f"{max(gaps, default=0.0):.3g} over {len(gaps)} instances"
    )
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_preset(args: argparse.Namespace) -> int:
    configs = figure_preset(args.preset_id)
    seed = _seed_override(args)
    if seed is not None:
        configs = [replace(c, master_seed=seed) for c in configs]
    if not args.run:
        _write(dump_configs(configs), args.out)
        return EXIT_OK
    if args.preset_id.startswith("table"):
        _run_protocols(configs, args)
    else:
        _run_sweeps(configs, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskrisk", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config: one object or a list")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (overrides config and MASKRISK_SEED)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress the stderr log")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("theory", parents=[common], help="limiting risk over a p-grid").set_defaults(fn=cmd_theory)
    sub.add_parser("simulate", parents=[common], help="masking-ratio sweep").set_defaults(fn=cmd_simulate)
    sub.add_parser("r2mae", parents=[common], help="R2MAE vs fixed-ratio protocol").set_defaults(fn=cmd_r2mae)
    oracle = sub.add_parser("oracle", parents=[common], help="closed-form vs Monte-Carlo self-check")
    oracle.add_argument("--instances", type=int, default=30)
    oracle.add_argument("--draws", type=int, default=100_000)
    oracle.set_defaults(fn=cmd_oracle)
    preset = sub.add_parser("preset", parents=[common], help="materialize (and optionally run) a preset")
    preset.add_argument("preset_id", help=", ".join(PRESET_IDS))
    preset.add_argument("--run", action="store_true", help="run the preset instead of printing it")
    preset.set_defaults(fn=cmd_preset)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="maskrisk: %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except (InvalidSpec, UnknownPreset) as exc:
        log.error("invalid config: %s", exc.args[0] if exc.args else exc)
        return EXIT_CONFIG
    except (MaskRiskError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
