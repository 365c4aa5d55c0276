"""Trajectory divergence between SQHA tracers and classical stochastic
trajectories as the system size grows, with a harmonic control.

    python3 scripts/classical_limit.py --scales 2,4,8,16 --out results/classical_limit.csv
"""
import argparse
import csv
import math
from pathlib import Path

import numpy as np

from sqha.classical_limit import ScaledSetup
from sqha.potentials import PotentialSpec
from sqha.spatial import fmt

COLUMNS = ("potential", "scale [1]", "domain [L]", "lambda_c/L [1]", "lambda_q/L [1]", "D [1]",
           "D_stderr [1]", "force_ratio [1]", "kick_rate [M^2 L^2/T^3]", "classical_regime")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scales", default="2,4,8,16")
    ap.add_argument("--tracers", type=int, default=400)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--no-control", action="store_true", help="skip the harmonic control runs")
    ap.add_argument("--out", default="results/classical_limit.csv")
    args = ap.parse_args()

    setup = ScaledSetup()
    # harmonic with the tail force matched at q = 32
    omega = math.sqrt(setup.potential.gradient(np.array([32.0]))[0] / 32.0)
    systems = [("tail", None)] + ([] if args.no_control else [("harmonic", PotentialSpec.harmonic(omega))])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for name, V in systems:
            for s in (float(x) for x in args.scales.split(",")):
                r = setup.run(s, args.tracers, args.seed, V=V)
                w.writerow([name, fmt(s), fmt(r.domain), fmt(r.scale_ratios[0]), fmt(r.scale_ratios[1]),
                            fmt(r.trajectory_divergence), fmt(r.divergence_stderr), fmt(r.force_ratio),
                            fmt(r.kick_rate), r.classical_regime])
                fh.flush()
                print(f"{name:8s} s={s:<5g} L={r.domain:<6g} D={r.trajectory_divergence:.4g}"
                      f" +- {r.divergence_stderr:.2g} F={r.force_ratio:.3g} regime={r.classical_regime}")


if __name__ == "__main__":
    main()
