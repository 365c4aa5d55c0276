"""Command-line entry point `sqha`."""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import GridConfig, RunConfig
from .errors import ConfigError, SQHAError
from .spatial import fmt

log = logging.getLogger("sqha")

COMMANDS = ("simulate", "reversal-scan", "range", "noise-validate", "classical-compare")
COV_COLUMNS = ("delta [L]", "empirical [1/(L^2 T)]", "theoretical [1/(L^2 T)]", "stderr [1/(L^2 T)]")


# --- output targets ------------------------------------------------------------

class Target:
    """Where a command writes. A directory holds the fixed file names; a path
    ending in .json or .csv is the main output, and companion files go next
    to it named <stem>.<name>."""

    def __init__(self, out: str, main_name: str):
        p = Path(out)
        self.is_file = p.suffix in (".json", ".csv")
        self.dir = p.parent if self.is_file else p
        self.stem = p.stem if self.is_file else None
        self.main = p if self.is_file else p / main_name
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        if self.is_file:
            return self.dir / f"{self.stem}.{name}"
        return self.dir / name

    def prepare(self):
        self.dir.mkdir(parents=True, exist_ok=True)

    def record(self, p: Path):
        self.written.append(p.name)


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj):
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --- config merge ----------------------------------------------------------------

def parse_grid(text: str) -> GridConfig:
    try:
        n, length = text.split(",")
        return GridConfig(int(n), float(length))
    except ValueError:
        raise ConfigError(f"--grid expects N,L, got {text!r}") from None


def load_base(args) -> RunConfig:
    if getattr(args, "manifest", None):
        m = json.loads(Path(args.manifest).read_text())
        return RunConfig.from_dict(m["config"])
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if "config" in d and "command" in d:  # a manifest
            d = d["config"]
        return RunConfig.from_dict(d)
    return RunConfig()


def merged_config(args) -> RunConfig:
    """Config file (or defaults) with every given flag applied on top."""
    cfg = load_base(args)
    d = cfg.to_dict()
    g = lambda name: getattr(args, name, None)  # noqa: E731
    if g("grid"):
        gc = parse_grid(args.grid)
        d["grid"] = {"N": gc.N, "L": gc.L}
    if g("potential"):
        d["potential"] = args.potential
    for flag, key in (("theta", "theta"), ("mobility", "mobility"), ("kB", "k"), ("f", "f")):
        if g(flag) is not None:
            d["noise"][key] = getattr(args, flag)
    for flag in ("hbar", "mass"):
        if g(flag) is not None:
            d["quantum"][flag] = getattr(args, flag)
    for flag in ("dt", "steps", "seed", "samples", "lambda_c"):
        if g(flag) is not None:
            d[flag] = getattr(args, flag)
    if g("tracers") is not None:
        d["tracers"]["count"] = args.tracers
    if g("thetas"):
        try:
            d["scan"]["thetas"] = [float(t) for t in args.thetas.split(",")]
        except ValueError:
            raise ConfigError(f"--thetas expects a comma-separated list, got {args.thetas!r}") from None
    for flag in ("horizon", "trials"):
        if g(flag) is not None:
            d["scan"][flag] = getattr(args, flag)
    if g("replay_noise"):
        d["scan"]["replay_noise"] = True
    if g("threshold") is not None:
        d["limit"]["threshold"] = args.threshold
    if g("no_calibrate"):
        d["limit"]["calibrate"] = False
    return RunConfig.from_dict(d)


# --- commands ---------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, target: Target, jobs: int) -> dict:
    from .simulate import run_simulation, write_outputs

    cfg.validate()
    target.prepare()
    res = run_simulation(cfg)
    for name in write_outputs(res, cfg.grid_obj, target.dir):
        target.written.append(name)
    return {}


def cmd_reversal_scan(cfg: RunConfig, target: Target, jobs: int) -> dict:
    import csv

    from .reversibility import asymmetry_scan, write_scan_csv

    cfg.validate()
    horizon = cfg.scan.horizon if cfg.scan.horizon is not None else cfg.crossing_time()
    target.prepare()
    results = asymmetry_scan(cfg, cfg.scan.thetas, horizon, cfg.scan.trials, cfg.seed,
                             jobs=jobs, replay_noise=cfg.scan.replay_noise)
    write_scan_csv(results, target.main)
    target.record(target.main)
    trials = target.path("trials.csv")
    with trials.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta [E/k]", "trial [1]", "A [1]", "fidelity_deficit [1]"])
        for r in results:
            for i, (a, fd) in enumerate(zip(r.values, r.fidelity_deficits)):
                w.writerow([fmt(r.theta), i, fmt(a), fmt(fd)])
    target.record(trials)
    failed = [r for r in results if r.error]
    return {"horizon": horizon, "failed_thetas": [r.theta for r in failed]}


def cmd_range(cfg: RunConfig, target: Target, jobs: int) -> dict:
    from .qpotential import classify_tail

    spec = cfg.potential_spec
    rep = classify_tail(spec, cfg.quantum, cfg.grid_obj, lambda_c=cfg.lambda_c)
    target.prepare()
    write_json(target.main, rep.to_dict())
    target.record(target.main)
    return {}


def cmd_noise_validate(cfg: RunConfig, target: Target, jobs: int) -> dict:
    import csv

    from .noise import NOISE_STREAM, NoiseField, StreamFamily, check_resolved, synthesize, validate_noise

    grid, p = cfg.grid_obj, cfg.noise_params
    if p.theta <= 0:
        raise ConfigError("noise-validate needs theta > 0")
    check_resolved(grid, p)
    fam = StreamFamily(cfg.seed, NOISE_STREAM)

    def samples():
        for i in range(cfg.samples):
            y = synthesize(grid, p, fam.block(i, 0, 1, grid.points)[0])
            yield NoiseField(grid, y, params=p, lambda_c=math.nan, dt=1.0, seed=(cfg.seed, i, 0))

    rep = validate_noise(samples(), min_samples=min(1000, cfg.samples))
    target.prepare()
    with target.main.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COV_COLUMNS)
        for lag, emp, theo, se in zip(rep.lags, rep.empirical, rep.theoretical, rep.stderr):
            w.writerow([fmt(lag), fmt(emp), fmt(theo), fmt(se)])
    target.record(target.main)
    summary = {"fitted_lambda_c": rep.fitted_lambda_c, "nominal_lambda_c": rep.nominal_lambda_c,
               "max_abs_deviation": rep.max_abs_deviation, "samples": rep.n_samples}
    spath = target.path("summary.json")
    write_json(spath, summary)
    target.record(spath)
    return summary


def cmd_classical_compare(cfg: RunConfig, target: Target, jobs: int) -> dict:
    from .classical_limit import compare_limit
    from .dynamics import gaussian_packet
    from .simulate import TRACER_COLUMNS, _write_rows

    cfg.validate()
    if cfg.tracers.count < 1:
        raise ConfigError("classical-compare needs tracers.count >= 1")
    grid, qp = cfg.grid_obj, cfg.quantum
    _, sub, inner = cfg.resolve_dt()
    psi0 = gaussian_packet(grid, cfg.init.center, cfg.init.sigma, cfg.init.momentum, qp)
    rep, (sq, cl) = compare_limit(cfg.potential_spec, qp, cfg.noise_params, grid, inner,
                                  cfg.steps * sub, cfg.tracers.count, cfg.seed, psi0,
                                  threshold=cfg.limit.threshold, calibrate=cfg.limit.calibrate,
                                  keep_trajectories=True)
    target.prepare()
    write_json(target.main, rep.to_dict())
    target.record(target.main)
    every = cfg.record_every * sub
    for name, series in (("sqha_tracers.csv", sq), ("classical_tracers.csv", cl)):
        rows = ((e.t, i, float(e.q[i]), float(e.p[i]), int(e.flagged[i]))
                for j, e in enumerate(series) if j % every == 0 or j == len(series) - 1
                for i in range(e.count))
        path = target.path(name)
        _write_rows(path, TRACER_COLUMNS, rows)
        target.record(path)
    return {}


HANDLERS = {
    "simulate": (cmd_simulate, "observables.csv"),
    "reversal-scan": (cmd_reversal_scan, "asymmetry.csv"),
    "range": (cmd_range, "report.json"),
    "noise-validate": (cmd_noise_validate, "cov.csv"),
    "classical-compare": (cmd_classical_compare, "limit.json"),
}


# --- argument parsing -----------------------------------------------------------------

def _common(p, config=True):
    if config:
        p.add_argument("--config", help="JSON run config (a manifest.json is accepted too)")
    p.add_argument("--out", required=True, help="output directory, or a .json/.csv file path")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--grid", help="N,L")
    p.add_argument("--theta", type=float)
    p.add_argument("--mobility", type=float)
    p.add_argument("--kB", type=float, help="Boltzmann constant")
    p.add_argument("--f", type=float, help="correlation length prefactor")
    p.add_argument("--hbar", type=float)
    p.add_argument("--mass", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqha", description=__doc__)
    ap.add_argument("--version", action="version", version=f"sqha {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve one run and write observables")
    _common(p)
    p.add_argument("--potential")
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--tracers", type=int)

    p = sub.add_parser("reversal-scan", help="forward/backward asymmetry against theta")
    _common(p)
    p.add_argument("--potential")
    p.add_argument("--dt", type=float)
    p.add_argument("--thetas", help="comma-separated ascending list starting at 0")
    p.add_argument("--horizon", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--replay-noise", action="store_true")

    p = sub.add_parser("range", help="classify the quantum-potential range of a potential")
    _common(p)
    p.add_argument("--potential")
    p.add_argument("--lambda-c", dest="lambda_c", type=float)

    p = sub.add_parser("noise-validate", help="empirical covariance of the noise field")
    _common(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("classical-compare", help="SQHA tracers against classical trajectories")
    _common(p)
    p.add_argument("--potential")
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--tracers", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--no-calibrate", action="store_true")

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    return ap


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = now()
    command = args.command
    if command == "rerun":
        try:
            command = json.loads(Path(args.manifest).read_text())["command"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from None
    handler, main_name = HANDLERS[command]
    cfg = merged_config(args)
    if command == "range" and not getattr(args, "grid", None) and not (
            getattr(args, "config", None) or getattr(args, "manifest", None)):
        cfg.grid = GridConfig(1024, 80.0)  # wide enough for broad-tailed ground states
    jobs = default_jobs() if args.jobs is None else args.jobs
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    target = Target(args.out, main_name)
    extra = handler(cfg, target, jobs)
    try:
        resolution = cfg.resolution()
    except SQHAError:
        resolution = {}
    manifest = {
        "tool": "sqha",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "resolution": resolution,
        "jobs": jobs,
        "outputs": sorted(target.written),
        "started": started,
        "finished": now(),
        **({"results": extra} if extra else {}),
    }
    write_json(target.path("manifest.json"), manifest)
    return 0


def main(argv=None) -> int:
    level = os.environ.get("SQHA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(argv)
    except SQHAError as exc:
        sys.stderr.write(json.dumps(jsonable(exc.to_dict()), sort_keys=True) + "\n")
        return exc.exit_status
    except OSError as exc:
        err = ConfigError(f"I/O failure: {exc}")
        sys.stderr.write(json.dumps(err.to_dict(), sort_keys=True) + "\n")
        return err.exit_status


if __name__ == "__main__":
    sys.exit(main())
