"""Forward/backward round trips under the stochastic dynamics and the
resulting time-reversal asymmetry as a function of the noise amplitude."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dynamics import Integrator, SimState, gaussian_packet
from .errors import ConfigError, SQHAError
from .noise import NOISE_STREAM, StreamFamily
from .spatial import WaveField, fmt

log = logging.getLogger(__name__)

PREFETCH = 64
SCAN_COLUMNS = ("theta [E/k]", "mean_A [1]", "stderr_A [1]", "mean_fidelity_deficit [1]", "trials [1]")


@dataclass
class AsymmetryResult:
    theta: float
    horizon: float
    trials: int
    mean: float
    stderr: float
    values: list = field(default_factory=list)
    fidelity_deficits: list = field(default_factory=list)
    error: str | None = None

    @property
    def mean_fidelity_deficit(self) -> float:
        return float(np.mean(self.fidelity_deficits)) if self.fidelity_deficits else math.nan


def time_reverse(state: SimState) -> SimState:
    """psi -> conj(psi): density kept, momentum density negated."""
    return SimState(WaveField(state.grid, np.conj(state.psi.values)), state.t, state.step)


def _round_trip_chunk(cfg_dict, theta, steps, seed, members, replay):
    """Round trips for a block of ensemble members, stacked along axis 0."""
    cfg = RunConfig.from_dict(cfg_dict).with_theta(theta)
    grid, qp = cfg.grid_obj, cfg.quantum
    _, sub, inner = cfg.resolve_dt()
    integ = Integrator(grid, cfg.potential_spec, qp, cfg.noise_params, inner)
    psi0 = gaussian_packet(grid, cfg.init.center, cfg.init.sigma, cfg.init.momentum, qp).values
    psi = np.tile(psi0, (len(members), 1))
    fam = StreamFamily(seed, NOISE_STREAM)
    n_inner = steps * sub

    def leg(psi, first, backwards=False):
        for t0 in range(0, n_inner, PREFETCH):
            k = min(PREFETCH, n_inner - t0)
            if not integ.stochastic:
                for _ in range(k):
                    psi = integ.step(psi)
                continue
            if backwards:
                # replay: forward-leg noise in reverse step order
                white = fam.prefetch(members, first - t0 - k + 1, k, grid.points)[::-1]
            else:
                white = fam.prefetch(members, first + t0, k, grid.points)
            for j in range(k):
                psi = integ.step(psi, white[j])
        return psi

    psi = leg(psi, 0)
    psi = np.conj(psi)
    # fresh noise on the way back unless replaying the forward realization
    psi = leg(psi, n_inner - 1, backwards=True) if replay else leg(psi, n_inner)
    psi = np.conj(psi)

    n0 = np.abs(psi0) ** 2
    n = np.abs(psi) ** 2
    a = np.linalg.norm(n - n0, axis=-1) / np.linalg.norm(n0)
    overlap = grid.spacing * np.sum(np.conj(psi0) * psi, axis=-1)
    return a, 1.0 - np.abs(overlap)


def reversal_asymmetry(config: RunConfig, theta: float, horizon: float, trials: int,
                       rng_seed: int, jobs: int = 1, replay_noise: bool = False,
                       chunk: int = 50) -> AsymmetryResult:
    """Evolve 0 -> T, reverse, evolve T -> 2T with fresh noise, reverse, and
    measure A = |n_final - n_0|_2 / |n_0|_2 per trial."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    cfg = config.with_theta(theta)
    cfg.validate()
    dt, _, _ = cfg.resolve_dt()
    steps = max(1, int(round(horizon / dt)))
    cfg_dict = cfg.to_dict()
    if theta == 0:
        # deterministic: every trial is the same round trip
        a, fid = _round_trip_chunk(cfg_dict, 0.0, steps, rng_seed, [0], replay_noise)
        a, fid = np.repeat(a, trials), np.repeat(fid, trials)
    else:
        blocks = [list(range(i, min(i + chunk, trials))) for i in range(0, trials, chunk)]
        args = [(cfg_dict, theta, steps, rng_seed, b, replay_noise) for b in blocks]
        if jobs > 1 and len(blocks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                parts = list(ex.map(_round_trip_chunk, *zip(*args)))
        else:
            parts = [_round_trip_chunk(*x) for x in args]
        a = np.concatenate([p[0] for p in parts])
        fid = np.concatenate([p[1] for p in parts])
    se = float(np.std(a, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return AsymmetryResult(theta, steps * dt, trials, float(np.mean(a)), se,
                           a.tolist(), fid.tolist())


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def asymmetry_scan(config: RunConfig, theta_grid, horizon: float, trials: int, seed: int,
                   jobs: int = 1, replay_noise: bool = False) -> list[AsymmetryResult]:
    thetas = [float(t) for t in theta_grid]
    if not thetas or any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ConfigError("theta grid must be strictly ascending", thetas=str(thetas))
    if thetas[0] != 0:
        raise ConfigError("theta grid must start with the theta = 0 baseline")
    out = []
    for j, th in enumerate(thetas):
        try:
            r = reversal_asymmetry(config, th, horizon, trials, derive_seed(seed, j), jobs, replay_noise)
        except SQHAError as exc:
            log.warning("theta=%g failed: %s", th, exc)
            r = AsymmetryResult(th, horizon, 0, math.nan, math.nan, error=f"{exc.module}.{exc.code}")
        log.info("theta=%g A=%.4g +- %.2g", th, r.mean, r.stderr)
        out.append(r)
    return out


def write_scan_csv(results, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*SCAN_COLUMNS, "error"])
        for r in results:
            w.writerow([fmt(r.theta), fmt(r.mean), fmt(r.stderr), fmt(r.mean_fidelity_deficit),
                        r.trials, r.error or ""])
