"""Compare the exact conditional risk with Monte Carlo on random small instances.

    python scripts/oracle_check.py --instances 30 --draws 100000
"""

from __future__ import annotations

import argparse
import sys

from maskrisk.oracle import oracle_suite


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=30)
    parser.add_argument("--draws", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    checks = oracle_suite(args.instances, args.seed, args.draws)
    for c in checks:
        print(f"{c.index:3d} {c.kind:9s} n={c.n:3d} d={c.d:3d} p={c.p:.1f} exact={c.closed_form:.5f} "
              f"mc={c.mc_mean:.5f}+-{c.mc_se:.5f} z={c.z:+.2f}")
    within = sum(c.within for c in checks)
    print(f"{within}/{len(checks)} within 3 standard errors")
    return 0 if within >= len(checks) * 28 / 30 else 1


if __name__ == "__main__":
    sys.exit(main())
