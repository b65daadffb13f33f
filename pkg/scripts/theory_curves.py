"""Print limiting risk curves for the isotropic and spiked models.

    python scripts/theory_curves.py --gamma 0.5 --kappa 0.04
    python scripts/theory_curves.py --delta 10 --cos 1 --d 1000 --gamma 5
"""

from __future__ import annotations

import argparse
import math

import numpy as np

from maskrisk.errors import AtPhaseTransition, NoSolution
from maskrisk.experiments import DEFAULT_GRID
from maskrisk.theory import TheoryParams, isotropic_risk, spiked_risk


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gamma", type=float, default=5.0)
    parser.add_argument("--kappa", type=float, default=0.04)
    parser.add_argument("--delta", type=float, help="spike strength; omit for the isotropic model")
    parser.add_argument("--cos", type=float, default=1.0, help="cosine between signal and spike")
    parser.add_argument("--d", type=int, default=1000)
    args = parser.parse_args()

    v = np.ones(args.d) / math.sqrt(args.d)
    w = np.zeros(args.d)
    w[0] = 1.0
    w -= (w @ v) * v
    w /= np.linalg.norm(w)
    beta = args.cos * v + math.sqrt(max(1.0 - args.cos**2, 0.0)) * w

    print("p,risk_over_r2")
    for p in DEFAULT_GRID:
        params = TheoryParams(p=p, gamma=args.gamma, kappa=args.kappa)
        try:
            if args.delta is None:
                risk = isotropic_risk(params)
            else:
                risk = spiked_risk(args.delta, v, beta, params, 1e-8).total
        except (AtPhaseTransition, NoSolution):
            risk = float("nan")
        print(f"{p:g},{risk:.6g}")


if __name__ == "__main__":
    main()
