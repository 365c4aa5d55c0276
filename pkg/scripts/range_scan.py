"""Range-of-interaction report for power-tail potentials across the tail
exponent, plus the harmonic and Lennard-Jones-like cases.

    python3 scripts/range_scan.py --out results/range_scan.csv
"""
import argparse
import csv
from pathlib import Path

from sqha.potentials import PotentialSpec
from sqha.qpotential import QuantumParams, classify_tail
from sqha.spatial import Grid1D, fmt

COLUMNS = ("potential", "kappa [1]", "lambda_q [L]", "tail_ratio [1]", "tail_exponent_estimate [1]",
           "converged", "q_max [L]")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kappas", default="0.25,0.5,0.6,0.667,0.8,1.0,1.5,2.0")
    ap.add_argument("--grid", default="1024,80")
    ap.add_argument("--out", default="results/range_scan.csv")
    args = ap.parse_args()
    n, length = args.grid.split(",")
    grid = Grid1D(float(length), int(n))
    specs = [PotentialSpec.power_tail(1.0, float(k)) for k in args.kappas.split(",")]
    specs += [PotentialSpec.harmonic(1.0), PotentialSpec.lennard_jones_like(5.0, 1.0)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for V in specs:
            r = classify_tail(V, QuantumParams(), grid)
            lam = r.lambda_q if isinstance(r.lambda_q, str) else fmt(r.lambda_q)
            kap = "" if V.tail_exponent is None else fmt(V.tail_exponent)
            w.writerow([str(V), kap, lam, fmt(r.tail_ratio), fmt(r.tail_exponent_estimate), r.converged,
                        fmt(r.q_max)])
            print(f"{str(V):32s} lambda_q={lam:<24} ratio={r.tail_ratio:.3f} converged={r.converged}")


if __name__ == "__main__":
    main()
