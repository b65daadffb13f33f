"""Run one or more presets and write their rows as CSV.

    python scripts/run_preset.py fig1b fig1d --out-dir results --seeds 0 1 2
"""

from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from maskrisk.experiments import PRESET_IDS, figure_preset, r2mae_protocol, sweep_mask_ratio
from maskrisk.tables import SWEEP_COLUMNS, csv_text


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("presets", nargs="+", choices=PRESET_IDS)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--seeds", type=int, nargs="*", help="override the preset seeds")
    parser.add_argument("--reps", type=int, help="override the repetitions per cell")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pid in args.presets:
        configs = figure_preset(pid)
        if args.seeds:
            configs = [replace(c, seeds=tuple(args.seeds)) for c in configs]
        if args.reps:
            configs = [replace(c, reps=args.reps) for c in configs]
        rows = []
        for cfg in configs:
            logging.info("%s: %s", pid, cfg.experiment_id)
            if pid.startswith("table"):
                rows.extend(r2mae_protocol(cfg, args.threads))
            else:
                rows.extend(sweep_mask_ratio(cfg, args.threads).rows)
        columns = None if pid.startswith("table") else SWEEP_COLUMNS
        path = out / f"{pid}.csv"
        path.write_text(csv_text(rows, columns), encoding="utf-8")
        logging.info("wrote %s (%d rows)", path, len(rows))


if __name__ == "__main__":
    main()
