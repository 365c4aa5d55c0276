"""Large-scale limit: SQHA tracers against classical stochastic trajectories.

The classical reference integrates p' = -dV/dq + kicks with the same
symplectic step as the SQHA tracers, only without the quantum force.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import (Integrator, TracerEnsemble, advance_tracers, gaussian_packet, place_tracers,
                       relax_ground_state, stability_bound, total_force)
from .errors import ConfigError, NonConfiningError
from .noise import KICK_STREAM, NOISE_STREAM, NoiseParams, StreamFamily, correlation_length
from .potentials import PotentialSpec
from .qpotential import (DEFAULT_LAMBDA_C, DIVERGENT, QuantumParams, RangeReport, interaction_range,
                         quantum_force_array, quantum_potential_array, reliable_extent)
from .spatial import Grid1D, ScalarField, WaveField

DEFAULT_THRESHOLD = 0.1
BULK_DENSITY = 0.01  # bulk = density above this fraction of its peak


@dataclass
class LimitReport:
    lambda_c: float
    lambda_q: float | str
    domain: float
    scale_ratios: tuple
    trajectory_divergence: float
    classical_regime: bool
    threshold: float = DEFAULT_THRESHOLD
    divergence_stderr: float = math.nan
    quantum_force_bulk: float = math.nan    # time-averaged max |dV_qu/dq| over the bulk
    classical_force_bulk: float = math.nan  # time-averaged max |dV/dq| over the bulk
    kick_rate: float = 0.0
    tracers_used: int = 0
    potential: str = ""
    range_report: dict | None = None

    def __post_init__(self):
        ok = (self.lambda_q != DIVERGENT
              and all(r < self.threshold for r in self.scale_ratios))
        if self.classical_regime and not ok:
            raise ValueError("classical_regime requires both scale ratios below the threshold")

    @property
    def force_ratio(self) -> float:
        return self.quantum_force_bulk / self.classical_force_bulk

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale_ratios"] = list(self.scale_ratios)
        d["force_ratio"] = self.force_ratio
        for key in ("lambda_c", "divergence_stderr", "quantum_force_bulk", "classical_force_bulk"):
            if isinstance(d[key], float) and not math.isfinite(d[key]):
                d[key] = str(d[key])
        d["scale_ratios"] = [r if math.isfinite(r) else str(r) for r in d["scale_ratios"]]
        return d


def default_kick_rate(theta: float, mass: float = 1.0, k: float = 1.0) -> float:
    """Momentum variance per unit time for a unit friction rate, 2 m k Theta."""
    return 2.0 * mass * k * theta


def classical_reference(V: PotentialSpec, ensemble: TracerEnsemble, theta: float, dt: float,
                        steps: int, seed: int, grid: Grid1D, mass: float = 1.0, k: float = 1.0,
                        kick_rate: float | None = None) -> list[TracerEnsemble]:
    """Classical stochastic tracers; returns steps + 1 snapshots.

    Each step adds momentum kicks with variance kick_rate * dt, drawn from the
    kick stream of `seed` (member 0, counter = step). The default rate is
    2 m k Theta.
    """
    if not dt > 0 or steps < 0:
        raise ConfigError("need dt > 0 and steps >= 0", dt=dt, steps=steps)
    rate = default_kick_rate(theta, mass, k) if kick_rate is None else float(kick_rate)
    if rate < 0:
        raise ConfigError("kick rate must be >= 0", kick_rate=rate)
    force = -V.gradient(grid.q)
    fam = StreamFamily(seed, KICK_STREAM)
    amp = math.sqrt(rate * dt)
    ens = ensemble.copy()
    ens.q = grid.wrap(ens.q)
    out = [ens]
    for t in range(steps):
        kicks = amp * fam.block(0, t, 1, ens.count)[0] if rate > 0 else None
        ens = advance_tracers(ens, force, grid, mass, dt, kicks=kicks)
        out.append(ens)
    return out


def bulk_forces(n: np.ndarray, grid: Grid1D, dv: np.ndarray, qp: QuantumParams):
    """(max |dV_qu/dq|, max |dV/dq|) over nodes where n > 1% of its peak."""
    bulk = n > BULK_DENSITY * n.max()
    fq = quantum_force_array(n, grid.k, qp)
    return float(np.max(np.abs(fq[bulk]))), float(np.max(np.abs(dv[bulk])))


def sqha_tracers(psi0: WaveField, ensemble: TracerEnsemble, V: PotentialSpec, qp: QuantumParams,
                 np_: NoiseParams, dt: float, steps: int, seed: int, include_quantum: bool = True,
                 member: int = 0):
    """Evolve psi and tracers together. Returns (snapshots, bulk force series)."""
    grid = psi0.grid
    integ = Integrator(grid, V, qp, np_, dt)
    fam = StreamFamily(seed, NOISE_STREAM)
    dv = V.gradient(grid.q)
    psi = psi0.values
    ens = ensemble.copy()
    ens.q = grid.wrap(ens.q)
    out, forces = [ens], []
    for t in range(steps):
        n = np.abs(psi) ** 2
        forces.append(bulk_forces(n, grid, dv, qp))
        f = total_force(n, grid, V, qp, include_quantum, dv)
        ens = advance_tracers(ens, f, grid, qp.mass, dt, density=n)
        out.append(ens)
        white = fam.block(member, t, 1, grid.points)[0] if integ.stochastic else None
        psi = integ.step(psi, white)
    return out, np.array(forces).reshape(-1, 2)


def calibrate_kicks(noisy: list[TracerEnsemble], quiet: list[TracerEnsemble],
                    mask: np.ndarray | None = None) -> float:
    """Momentum variance rate the density noise induces on tracers: the mean
    squared momentum gap between noisy and noise-free runs, over elapsed time."""
    last, ref = noisy[-1], quiet[-1]
    span = last.t - noisy[0].t
    if span <= 0:
        return 0.0
    use = ~(last.flagged | ref.flagged) if mask is None else mask
    if not np.any(use):
        return 0.0
    return float(np.mean((last.p[use] - ref.p[use]) ** 2) / span)


def trajectory_divergence(a: list[TracerEnsemble], b: list[TracerEnsemble], grid: Grid1D,
                          mask: np.ndarray, blocks: int = 20):
    """Time average of the RMS (minimum-image) position gap over the masked
    tracers, divided by the domain length; stderr by jackknife over tracer blocks."""
    gaps = np.stack([grid.wrap(x.q - y.q) for x, y in zip(a, b)])[:, mask]
    sq = gaps**2
    d = float(np.mean(np.sqrt(sq.mean(axis=1)))) / grid.length
    m = sq.shape[1]
    nb = min(blocks, m)
    if nb < 2:
        return d, math.nan
    groups = np.array_split(np.arange(m), nb)
    jack = []
    for g in groups:
        keep = np.ones(m, bool)
        keep[g] = False
        jack.append(np.mean(np.sqrt(sq[:, keep].mean(axis=1))) / grid.length)
    jack = np.array(jack)
    se = math.sqrt((nb - 1) / nb * np.sum((jack - jack.mean()) ** 2))
    return d, float(se)


def range_for_limit(V: PotentialSpec, qp: QuantumParams, grid: Grid1D, psi0: WaveField,
                    lambda_c: float) -> RangeReport:
    """lambda_q from the relaxed state (the initial state if V has none).

    The denominator is read at lambda_c when that lies inside the reliable
    range; otherwise (deterministic runs, very long correlation) at the
    default probe length, pulled inside the range if needed.
    """
    try:
        n = np.abs(relax_ground_state(V, qp, grid).values) ** 2
    except NonConfiningError:
        n = np.abs(psi0.values) ** 2
    vq = ScalarField(grid, quantum_potential_array(n, grid.k, qp))
    q_max = min(0.45 * grid.length, reliable_extent(n, grid.q))
    probe = lambda_c if lambda_c < q_max else min(DEFAULT_LAMBDA_C, 0.5 * q_max)
    rep = interaction_range(vq, probe, q_max)
    rep.potential = str(V)
    rep.kappa = V.tail_exponent
    return rep


def compare_limit(V: PotentialSpec, qp: QuantumParams, np_: NoiseParams, grid: Grid1D, dt: float,
                  steps: int, tracers, seed: int, psi0: WaveField | None = None,
                  threshold: float = DEFAULT_THRESHOLD, calibrate: bool = True,
                  include_quantum: bool = True, kick_rate: float | None = None,
                  keep_trajectories: bool = False):
    """SQHA tracers against the classical reference from the same initial
    tracer conditions and seed.

    `tracers` is a count (density-quantile placement) or a TracerEnsemble.
    With calibrate=True the classical kick rate is measured from a noise-free
    SQHA pass (see calibrate_kicks); kick_rate overrides it. Returns the
    report, plus (sqha, classical) snapshot lists when keep_trajectories.
    """
    if dt > stability_bound(grid, V, qp) * (1 + 1e-12):
        raise ConfigError("dt exceeds the step bound", dt=dt, bound=stability_bound(grid, V, qp))
    if psi0 is None:
        psi0 = gaussian_packet(grid, 0.0, 1.0, 0.0, qp)
    if isinstance(tracers, TracerEnsemble):
        ens0 = tracers.copy()
    else:
        ens0 = place_tracers(psi0, int(tracers), "density", qp)

    sqha, forces = sqha_tracers(psi0, ens0, V, qp, np_, dt, steps, seed, include_quantum)
    if kick_rate is not None:
        rate = float(kick_rate)
    elif np_.theta == 0:
        rate = 0.0
    elif calibrate:
        quiet, _ = sqha_tracers(psi0, ens0, V, qp, np_.with_theta(0.0), dt, steps, seed,
                                include_quantum)
        rate = calibrate_kicks(sqha, quiet)
    else:
        rate = default_kick_rate(np_.theta, qp.mass, np_.k)
    cl = classical_reference(V, ens0, np_.theta, dt, steps, seed, grid, qp.mass, np_.k, rate)

    mask = ~sqha[-1].flagged
    if not np.any(mask):
        raise ConfigError("every tracer left the resolved density; use more tracers or a shorter run")
    d, se = trajectory_divergence(sqha, cl, grid, mask)

    lc = correlation_length(np_)
    rep = range_for_limit(V, qp, grid, psi0, lc)
    ratios = (lc / grid.length, math.inf if rep.divergent else rep.lambda_q / grid.length)
    regime = (not rep.divergent) and all(r < threshold for r in ratios)
    fq, fc = forces.mean(axis=0) if len(forces) else (math.nan, math.nan)
    report = LimitReport(lc, rep.lambda_q, grid.length, ratios, d, regime, threshold, se,
                         float(fq), float(fc), rate, int(mask.sum()), str(V), rep.to_dict())
    if keep_trajectories:
        return report, (sqha, cl)
    return report


# --- scaled systems ----------------------------------------------------------

def fall_time(V: PotentialSpec, start: float, mass: float = 1.0, dt: float = 1e-3,
              max_time: float = 1e4) -> float:
    """Time a classical particle released at rest at `start` needs to reach
    the potential minimum at q = 0."""
    q, p, t = float(start), 0.0, 0.0
    while q * start > 0:
        p -= float(V.gradient(np.array([q]))[0]) * dt
        q += p / mass * dt
        t += dt
        if t > max_time:
            raise ConfigError("particle does not fall toward q = 0", start=start)
    return t


@dataclass(frozen=True)
class ScaledSetup:
    """One fixed potential probed at a growing system length.

    The domain, the packet offset and the packet width all scale with s, so
    the motion spans a region of size ~ s. hbar, m, the potential and Theta are
    fixed; the grid spacing is shared. The horizon is a fixed fraction of the
    time the packet centre needs to fall to the minimum, which keeps every run
    short of the first focusing of the released packet.
    """

    potential: PotentialSpec = field(default_factory=lambda: PotentialSpec.power_tail(1.0, 0.5, 1.0))
    length: float = 32.0      # domain at s = 1
    spacing: float = 0.125
    sigma: float = 0.5        # packet density std at s = 1
    center: float = 4.0       # packet offset at s = 1
    horizon_fraction: float = 0.5
    theta: float = 0.5
    # The density kick fills the empty tails with noise-level density whose
    # clipped square root carries grid-scale structure into the bulk; the
    # mobility is kept low enough that this stays below round-off.
    mobility: float = 1e-50
    qp: QuantumParams = field(default_factory=QuantumParams)

    def grid(self, s: float) -> Grid1D:
        n = int(round(self.length * s / self.spacing))
        n += n % 2
        return Grid1D(n * self.spacing, n)

    def noise(self) -> NoiseParams:
        return NoiseParams(self.theta, mobility=self.mobility, mass=self.qp.mass, hbar=self.qp.hbar)

    def packet(self, s: float) -> WaveField:
        return gaussian_packet(self.grid(s), self.center * s, self.sigma * s, 0.0, self.qp)

    def horizon(self, s: float, V: PotentialSpec | None = None) -> float:
        return self.horizon_fraction * fall_time(V or self.potential, self.center * s, self.qp.mass)

    def run(self, s: float, tracers: int, seed: int, V: PotentialSpec | None = None, **kw):
        V = V or self.potential
        g = self.grid(s)
        dt = stability_bound(g, V, self.qp)
        steps = max(1, int(round(self.horizon(s, V) / dt)))
        return compare_limit(V, self.qp, self.noise(), g, dt, steps, tracers, seed, self.packet(s), **kw)
