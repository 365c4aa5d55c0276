"""Full runs from a RunConfig: observables, density snapshots and tracers."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dynamics import (Integrator, advance_tracers, energy, gaussian_packet,
                       place_tracers, total_force)
from .noise import NOISE_STREAM, StreamFamily
from .qpotential import quantum_potential_array
from .spatial import WaveField, fmt

OBSERVABLE_COLUMNS = ("t [T]", "norm [1]", "energy [E]", "mean_q [L]", "mean_q2 [L^2]", "H_qu [E]")
SNAPSHOT_COLUMNS = ("t [T]", "q [L]", "n [1/L]")
TRACER_COLUMNS = ("t [T]", "id [1]", "q [L]", "p [M L/T]", "flagged [1]")


@dataclass
class RunResult:
    observables: list = field(default_factory=list)   # rows matching OBSERVABLE_COLUMNS
    snapshots: list = field(default_factory=list)     # (t, density array)
    tracers: list = field(default_factory=list)       # TracerEnsemble per record
    final_psi: np.ndarray | None = None


def observables_row(t, psi, grid, v, qp):
    n = np.abs(psi) ** 2
    h = grid.spacing
    hq = float(h * np.sum(n * quantum_potential_array(n, grid.k, qp)))
    return (t, float(h * n.sum()), energy(psi, grid, v, qp), float(h * np.sum(n * grid.q)),
            float(h * np.sum(n * grid.q**2)), hq)


def run_simulation(cfg: RunConfig, member: int = 0) -> RunResult:
    """Integrate cfg.steps outer steps of size dt (each split into substeps
    that respect the step bound), recording every `record_every` steps."""
    cfg.validate()
    grid, qp, V = cfg.grid_obj, cfg.quantum, cfg.potential_spec
    dt, sub, inner = cfg.resolve_dt()
    integ = Integrator(grid, V, qp, cfg.noise_params, inner)
    psi = gaussian_packet(grid, cfg.init.center, cfg.init.sigma, cfg.init.momentum, qp).values
    v = V.values(grid.q)
    dv = V.gradient(grid.q)
    fam = StreamFamily(cfg.seed, NOISE_STREAM)
    ens = None
    if cfg.tracers.count:
        ens = place_tracers(WaveField(grid, psi), cfg.tracers.count, cfg.tracers.placement, qp)
    res = RunResult()

    def record(step, t):
        if step % cfg.record_every == 0 or step == cfg.steps:
            res.observables.append(observables_row(t, psi, grid, v, qp))
            if ens is not None:
                res.tracers.append(ens.copy())
        if cfg.snapshot_every and (step % cfg.snapshot_every == 0 or step == cfg.steps):
            res.snapshots.append((t, np.abs(psi) ** 2))

    record(0, 0.0)
    for step in range(1, cfg.steps + 1):
        first = (step - 1) * sub
        white = fam.block(member, first, sub, grid.points) if integ.stochastic else [None] * sub
        for j in range(sub):
            if ens is not None:
                n = np.abs(psi) ** 2
                ens = advance_tracers(ens, total_force(n, grid, V, qp, dv=dv), grid, qp.mass,
                                      inner, density=n)
            psi = integ.step(psi, white[j])
        record(step, step * dt)
    res.final_psi = psi
    return res


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


def write_outputs(res: RunResult, grid, out_dir) -> list[str]:
    out = Path(out_dir)
    files = ["observables.csv"]
    _write_rows(out / "observables.csv", OBSERVABLE_COLUMNS, res.observables)
    if res.snapshots:
        rows = ((t, float(q), float(n[i])) for t, n in res.snapshots for i, q in enumerate(grid.q))
        _write_rows(out / "density_snapshots.csv", SNAPSHOT_COLUMNS, rows)
        files.append("density_snapshots.csv")
    if res.tracers:
        rows = ((e.t, i, float(e.q[i]), float(e.p[i]), int(e.flagged[i]))
                for e in res.tracers for i in range(e.count))
        _write_rows(out / "tracers.csv", TRACER_COLUMNS, rows)
        files.append("tracers.csv")
    return files
