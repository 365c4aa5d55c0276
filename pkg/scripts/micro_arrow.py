"""Forward/backward asymmetry A(theta) for a free packet crossing its own width.

    python3 scripts/micro_arrow.py --out results/micro_arrow.csv
"""
import argparse
import logging
from pathlib import Path

from sqha.cli import default_jobs
from sqha.config import GridConfig, InitConfig, RunConfig
from sqha.reversibility import asymmetry_scan, write_scan_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=512)
    ap.add_argument("--length", type=float, default=40.0)
    ap.add_argument("--thetas", default="0,1e-4,3e-4,1e-3,3e-3")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--mobility", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=20240)
    ap.add_argument("--jobs", type=int, default=default_jobs())
    ap.add_argument("--out", default="results/micro_arrow.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(message)s")

    cfg = RunConfig(grid=GridConfig(args.points, args.length), init=InitConfig(0.0, 1.0, 1.0))
    cfg.noise.mobility = args.mobility
    thetas = [float(t) for t in args.thetas.split(",")]
    res = asymmetry_scan(cfg, thetas, cfg.crossing_time(), args.trials, args.seed, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scan_csv(res, out)
    for r in res:
        print(f"theta={r.theta:<8g} A={r.mean:.5g} +- {r.stderr:.2g}")


if __name__ == "__main__":
    main()
