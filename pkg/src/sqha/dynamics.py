"""Wavefunction time stepping (deterministic split-step and stochastic density
kick), Bohmian tracer integration and imaginary-time ground-state relaxation."""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, NoiseTooStrongError, NonConfiningError
from .noise import NoiseParams, check_resolved, sample_noise_array, synthesize
from .potentials import PotentialSpec
from .qpotential import QuantumParams, quantum_force_array
from .spatial import Grid1D, WaveField

log = logging.getLogger(__name__)

MAX_CLIP_FRACTION = 0.01
TRACER_FLOOR = 1e-8  # relative density below which the quantum force is not trusted


@dataclass(frozen=True)
class SimState:
    psi: WaveField
    t: float = 0.0
    step: int = 0

    @property
    def grid(self) -> Grid1D:
        return self.psi.grid

    def density(self) -> np.ndarray:
        return np.abs(self.psi.values) ** 2


@dataclass
class TracerEnsemble:
    q: np.ndarray
    p: np.ndarray
    flagged: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.p = np.asarray(self.p, dtype=float).copy()
        if self.q.shape != self.p.shape:
            raise ConfigError("tracer positions and momenta differ in length")
        if self.flagged is None:
            self.flagged = np.zeros(self.q.shape, dtype=bool)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ConfigError("tracer state is not finite")

    @property
    def count(self) -> int:
        return self.q.size

    def copy(self):
        return TracerEnsemble(self.q, self.p, self.flagged.copy(), self.t)


def gaussian_packet(grid: Grid1D, center=0.0, sigma=1.0, momentum=0.0,
                    qp: QuantumParams = QuantumParams()) -> WaveField:
    """Minimum-uncertainty packet with density std `sigma`, wrapped periodically."""
    x = grid.wrap(grid.q - center)
    psi = np.exp(-x**2 / (4 * sigma**2) + 1j * momentum * x / qp.hbar)
    return WaveField.normalized(grid, psi)


def stability_bound(grid: Grid1D, V: PotentialSpec, qp: QuantumParams) -> float:
    """dt <= 0.1 min(2 m h^2 / (pi hbar), hbar / max|V|)."""
    h = grid.spacing
    kin = 2 * qp.mass * h * h / (math.pi * qp.hbar)
    vmax = float(np.max(np.abs(V.values(grid.q))))
    pot = qp.hbar / vmax if vmax > 0 else math.inf
    return 0.1 * min(kin, pot)


class SplitStep:
    """Strang splitting exp(-iV dt/2) exp(-iK dt) exp(-iV dt/2). Works on a
    single wavefunction or a stack of them (last axis = grid)."""

    def __init__(self, grid: Grid1D, V: PotentialSpec, qp: QuantumParams, dt: float,
                 enforce_bound: bool = True):
        if not dt > 0:
            raise ConfigError("dt must be positive", dt=dt)
        bound = stability_bound(grid, V, qp)
        if enforce_bound and dt > bound * (1 + 1e-12):
            raise ConfigError(f"dt={dt:g} exceeds the step bound {bound:g}", dt=dt, bound=bound)
        self.grid, self.V, self.qp, self.dt = grid, V, qp, dt
        v = V.values(grid.q)
        self.half_v = np.exp(-0.5j * v * dt / qp.hbar)
        self.kin = np.exp(-0.5j * qp.hbar * grid.k**2 * dt / qp.mass)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = self.half_v * psi
        psi = np.fft.ifft(self.kin * np.fft.fft(psi, axis=-1), axis=-1)
        psi = self.half_v * psi
        return renormalize(psi, self.grid.spacing)


@functools.lru_cache(maxsize=32)
def _propagator(grid, V, qp, dt):
    return SplitStep(grid, V, qp, dt)


def renormalize(psi: np.ndarray, h: float) -> np.ndarray:
    norm = h * np.sum(psi.real**2 + psi.imag**2, axis=-1, keepdims=True)
    return psi / np.sqrt(norm)


def step_deterministic(state: SimState, V: PotentialSpec, p: QuantumParams, dt: float) -> SimState:
    psi = _propagator(state.grid, V, p, dt)(state.psi.values)
    return SimState(WaveField(state.grid, psi), state.t + dt, state.step + 1)


def density_kick(psi: np.ndarray, kick: np.ndarray, h: float) -> np.ndarray:
    """Add `kick` to |psi|^2, clip negatives, renormalize, keep the phase.

    Raises NoiseTooStrongError when the clipped mass exceeds 1% of the total.
    """
    n = psi.real**2 + psi.imag**2
    n_new = n + kick
    neg = n_new < 0
    if np.any(neg):
        clipped = -h * np.sum(np.where(neg, n_new, 0.0), axis=-1)
        total = h * np.sum(n, axis=-1)
        frac = clipped / total
        if np.any(frac > MAX_CLIP_FRACTION):
            raise NoiseTooStrongError(
                "density kick clipped more than 1% of the mass in one step",
                clip_fraction=float(np.max(frac)))
        n_new = np.where(neg, 0.0, n_new)
    n_new = n_new / (h * np.sum(n_new, axis=-1, keepdims=True))
    # psi * sqrt(n_new / n) keeps arg(psi); nodes (n == 0) take phase 0
    scale = np.sqrt(np.divide(n_new, n, out=np.zeros_like(n), where=n > 0))
    out = psi * scale
    nodes = n == 0
    if np.any(nodes):
        out[nodes] = np.sqrt(n_new[nodes])
    return out


class Integrator:
    """Stochastic stepper for fixed (grid, V, quantum, noise, dt) acting on one
    wavefunction or a stack of them. `white` holds the standard normals for
    this step, one row per ensemble member."""

    def __init__(self, grid: Grid1D, V: PotentialSpec, qp: QuantumParams, np_: NoiseParams,
                 dt: float, enforce_bound: bool = True):
        self.prop = SplitStep(grid, V, qp, dt, enforce_bound)
        self.grid, self.noise, self.dt = grid, np_, dt
        self.stochastic = np_.theta > 0
        if self.stochastic:
            check_resolved(grid, np_)
        self._sqrt_dt = math.sqrt(dt)

    def step(self, psi: np.ndarray, white: np.ndarray | None = None) -> np.ndarray:
        psi = self.prop(psi)
        if not self.stochastic:
            return psi
        y = synthesize(self.grid, self.noise, white)
        return density_kick(psi, y * self._sqrt_dt, self.grid.spacing)


def step_stochastic(state: SimState, V: PotentialSpec, qp: QuantumParams, np_: NoiseParams,
                    rng: np.random.Generator, dt: float) -> SimState:
    """Deterministic step followed by the density kick n <- n + Y dt with
    Y the (dt^-1/2 scaled) correlated noise field."""
    det = step_deterministic(state, V, qp, dt)
    if np_.theta == 0:
        return det
    grid = state.grid
    y = sample_noise_array(grid, np_, rng)
    psi = density_kick(det.psi.values, y * math.sqrt(dt), grid.spacing)
    return SimState(WaveField(grid, psi), det.t, det.step)


# --- tracers -----------------------------------------------------------------

def interp_periodic(grid: Grid1D, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of grid data at positions x (periodic)."""
    s = (np.asarray(x) + 0.5 * grid.length) / grid.spacing
    i0 = np.floor(s).astype(int)
    w = s - i0
    i0 %= grid.points
    i1 = (i0 + 1) % grid.points
    return (1 - w) * values[i0] + w * values[i1]


def bohm_momentum(psi: np.ndarray, grid: Grid1D, qp: QuantumParams, floor=None) -> np.ndarray:
    """Momentum field hbar Im(psi* psi') / |psi|^2 on the grid."""
    n = np.abs(psi) ** 2
    if floor is None:
        floor = 1e-300 + 1e-30 * n.max()
    dpsi = np.fft.ifft(1j * grid.k * np.fft.fft(psi))
    return qp.hbar * np.imag(np.conj(psi) * dpsi) / (n + floor)


def place_tracers(psi: WaveField, count: int, placement: str = "density",
                  qp: QuantumParams = QuantumParams(), spread: float = 1.0) -> TracerEnsemble:
    """Deterministic tracer placement.

    density  -- density quantiles (i + 1/2)/count
    center   -- all at the density maximum
    uniform  -- evenly over the central `spread` fraction of the domain
    Momenta are taken from the Bohm momentum field.
    """
    grid = psi.grid
    n = np.abs(psi.values) ** 2
    if count < 1:
        raise ConfigError("tracer count must be >= 1")
    if placement == "density":
        cdf = np.cumsum(n) * grid.spacing
        cdf /= cdf[-1]
        targets = (np.arange(count) + 0.5) / count
        # cdf[j] is the mass up to the right edge of cell j
        q = np.interp(targets, cdf, grid.q + 0.5 * grid.spacing)
    elif placement == "center":
        q = np.full(count, grid.q[int(np.argmax(n))])
    elif placement == "uniform":
        half = 0.5 * spread * grid.length
        q = np.linspace(-half, half, count, endpoint=False) + half / count
    else:
        raise ConfigError(f"unknown tracer placement {placement!r}")
    p = interp_periodic(grid, bohm_momentum(psi.values, grid, qp), q)
    return TracerEnsemble(q, p)


def total_force(n: np.ndarray, grid: Grid1D, V: PotentialSpec, qp: QuantumParams,
                include_quantum: bool = True, dv: np.ndarray | None = None) -> np.ndarray:
    f = -(V.gradient(grid.q) if dv is None else dv)
    if include_quantum:
        f = f + quantum_force_array(n, grid.k, qp)
    return f


def advance_tracers(ens: TracerEnsemble, force: np.ndarray, grid: Grid1D, mass: float,
                    dt: float, density: np.ndarray | None = None,
                    kicks: np.ndarray | None = None) -> TracerEnsemble:
    """One symplectic-Euler step: p += F(q) dt (+ kicks); q += p/m dt."""
    out = ens.copy()
    if density is not None:
        nq = interp_periodic(grid, density, out.q)
        out.flagged |= nq < TRACER_FLOOR * density.max()
    out.p = out.p + interp_periodic(grid, force, out.q) * dt
    if kicks is not None:
        out.p = out.p + kicks
    out.q = grid.wrap(out.q + out.p / mass * dt)
    out.t = ens.t + dt
    return out


def trace_trajectories(states, ensemble: TracerEnsemble, qp: QuantumParams, V: PotentialSpec,
                       dt: float, include_quantum: bool = True) -> list[TracerEnsemble]:
    """Advance tracers through a time series of states spaced by dt in the
    field -d(V + V_qu)/dq of each state. Returns one snapshot per state."""
    states = list(states)
    if not states:
        return [ensemble.copy()]
    grid = states[0].grid
    dv = V.gradient(grid.q)
    ens = ensemble.copy()
    ens.q = grid.wrap(ens.q)
    out = [ens]
    for s in states[:-1]:
        n = s.density()
        f = total_force(n, grid, V, qp, include_quantum, dv)
        ens = advance_tracers(ens, f, grid, qp.mass, dt, density=n)
        out.append(ens)
    return out


# --- ground state ------------------------------------------------------------

def energy(psi: np.ndarray, grid: Grid1D, v: np.ndarray, qp: QuantumParams) -> float:
    """<H> = kinetic (spectral) + potential."""
    h = grid.spacing
    pk = np.fft.fft(psi)
    kin = qp.hbar**2 / (2 * qp.mass) * np.sum(grid.k**2 * np.abs(pk) ** 2) * h / grid.points
    pot = h * np.sum(v * np.abs(psi) ** 2)
    return float(kin + pot)


def relax_ground_state(V: PotentialSpec, qp: QuantumParams, grid: Grid1D,
                       tol: float = 1e-12, tau_max: float = 0.05, tau_min: float = 1e-3, state_tol: float = 1e-9,
                       max_iter: int = 400_000) -> WaveField:
    """Imaginary-time split-step relaxation with a decreasing step schedule.

    Each stage runs until the energy changes by less than `tol` per step; the
    schedule shrinks tau to keep the O(tau^2) splitting bias small, and the
    last stage additionally waits until max|d psi/d tau| < state_tol.
    """
    v = V.values(grid.q)
    if V.family == "free" or np.ptp(v) == 0:
        raise NonConfiningError("potential is flat; no normalizable ground state", potential=str(V))
    v0 = v - v.min()
    x = grid.wrap(grid.q - grid.q[int(np.argmin(v))])
    psi = np.exp(-x**2 / (2 * (grid.length / 20) ** 2)).astype(complex)
    psi = renormalize(psi, grid.spacing)
    k2 = grid.k**2
    it = 0
    taus = []
    tau = tau_max
    while tau > tau_min * (1 + 1e-9):
        taus.append(tau)
        tau /= 2
    taus.append(tau_min)
    e_old = energy(psi, grid, v, qp)
    resid = math.inf
    for tau in taus:
        half_v = np.exp(-0.5 * v0 * tau / qp.hbar)
        kin = np.exp(-0.5 * qp.hbar * k2 * tau / qp.mass)
        final = tau == taus[-1]
        while True:
            new = renormalize(half_v * np.fft.ifft(kin * np.fft.fft(half_v * psi)), grid.spacing)
            e = energy(new, grid, v, qp)
            resid = abs(e - e_old)
            # energy is quadratic in the state error, so the last stage also
            # requires the state itself to have stopped moving
            moved = np.max(np.abs(new - psi)) / tau if final else 0.0
            psi, e_old = new, e
            it += 1
            if resid < tol and moved < state_tol:
                break
            if it >= max_iter:
                raise ConvergenceError("imaginary-time relaxation did not converge",
                                       iterations=it, residual=resid, tau=tau)
    psi = np.abs(psi)  # ground state is real and nodeless
    psi = WaveField.normalized(grid, psi)
    edge = v[0]  # potential at the wrap point
    if e_old >= edge:
        raise NonConfiningError("relaxed energy is not below the potential at the domain edge",
                                energy=e_old, edge_potential=float(edge))
    log.debug("relaxed %s in %d iterations, E=%.12g", V, it, e_old)
    return psi
