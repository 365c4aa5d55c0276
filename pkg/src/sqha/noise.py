"""Spatially correlated, time-white noise fields: correlation length, spectral
synthesis on the periodic grid, and empirical covariance validation."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, InvalidFieldError, UnresolvedCorrelationError
from .spatial import Grid1D, ScalarField

# stream purposes for seed derivation
NOISE_STREAM = 0
KICK_STREAM = 1


@dataclass(frozen=True)
class NoiseParams:
    theta: float = 0.0
    k: float = 1.0           # Boltzmann constant
    mobility: float = 1.0
    f: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ConfigError("theta must be finite and >= 0", theta=self.theta)
        for name in ("k", "mobility", "f", "mass", "hbar"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"noise parameter {name} must be positive", **{name: v})

    def with_theta(self, theta) -> "NoiseParams":
        return NoiseParams(theta, self.k, self.mobility, self.f, self.mass, self.hbar)


def correlation_length(p: NoiseParams) -> float:
    """lambda_c = f hbar / sqrt(2 m k theta); infinite in the deterministic limit."""
    if p.theta == 0:
        return math.inf
    return p.f * p.hbar / math.sqrt(2 * p.mass * p.k * p.theta)


def kernel_variance(p: NoiseParams) -> float:
    """C(0) = k theta mobility / (2 lambda_c^2)."""
    if p.theta == 0:
        return 0.0
    lc = correlation_length(p)
    return p.k * p.theta * p.mobility / (2 * lc * lc)


def covariance_kernel(delta, p: NoiseParams):
    """C(delta) = C(0) exp(-(delta/lambda_c)^2)."""
    delta = np.asarray(delta, dtype=float)
    if p.theta == 0:
        return np.zeros_like(delta)
    lc = correlation_length(p)
    return kernel_variance(p) * np.exp(-(delta / lc) ** 2)


def periodic_lags(grid: Grid1D) -> np.ndarray:
    j = np.arange(grid.points)
    return np.minimum(j, grid.points - j) * grid.spacing


@functools.lru_cache(maxsize=64)
def noise_spectrum(grid: Grid1D, p: NoiseParams) -> np.ndarray:
    """Square root of the circulant covariance eigenvalues (rfft layout), with the
    mean mode removed so every field has zero spatial mean."""
    c = covariance_kernel(periodic_lags(grid), p)
    eig = np.fft.rfft(c).real
    amp = np.sqrt(np.clip(eig, 0.0, None))
    amp[0] = 0.0
    amp.flags.writeable = False
    return amp


def check_resolved(grid: Grid1D, p: NoiseParams):
    lc = correlation_length(p)
    if lc < 2 * grid.spacing:
        raise UnresolvedCorrelationError(
            f"correlation length {lc:.4g} is below two grid spacings ({2 * grid.spacing:.4g}); refine the grid",
            lambda_c=lc, spacing=grid.spacing)


class StreamFamily:
    """Counter-addressed standard normals.

    Member i owns a Philox key derived from (master_seed, purpose, i). Step t
    reads a fixed run of raw words starting at counter t * words_per_step / 4
    and turns them into normals by Box-Muller, so the block for any (i, t) is
    reproducible on its own, whatever the chunking or scheduling.
    """

    def __init__(self, master_seed: int, purpose: int = NOISE_STREAM):
        self.master_seed, self.purpose = int(master_seed), int(purpose)
        self._bitgen = np.random.Philox(key=0)
        self._keys = {}

    def key(self, member: int) -> np.ndarray:
        k = self._keys.get(member)
        if k is None:
            ss = np.random.SeedSequence([self.master_seed, self.purpose, int(member)])
            k = self._keys[member] = ss.generate_state(2, np.uint64)
        return k

    @staticmethod
    def words_per_step(size: int) -> int:
        even = size + size % 2
        return 4 * -(-even // 4)

    def _raw(self, member: int, step: int, nsteps: int, size: int) -> np.ndarray:
        m = self.words_per_step(size)
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([step * m // 4, 0, 0, 0], dtype=np.uint64),
                      "key": self.key(member)},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._bitgen.random_raw(nsteps * m).reshape(nsteps, m)

    def block(self, member: int, step: int, nsteps: int, size: int) -> np.ndarray:
        """Normals for steps [step, step + nsteps), shape (nsteps, size)."""
        raw = self._raw(member, step, nsteps, size)
        u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        half = raw.shape[1] // 2
        r = np.sqrt(-2.0 * np.log1p(-u[:, :half]))
        ang = 2 * np.pi * u[:, half:2 * half]
        z = np.concatenate([r * np.cos(ang), r * np.sin(ang)], axis=1)
        return z[:, :size]

    def normals(self, members, step: int, size: int) -> np.ndarray:
        """One step for several members, shape (len(members), size)."""
        return np.stack([self.block(m, step, 1, size)[0] for m in members])

    def prefetch(self, members, step: int, nsteps: int, size: int) -> np.ndarray:
        """Blocks for several members, shape (nsteps, len(members), size)."""
        return np.stack([self.block(m, step, nsteps, size) for m in members], axis=1)


def synthesize(grid: Grid1D, p: NoiseParams, white: np.ndarray) -> np.ndarray:
    """Colour white normals (last axis = grid) with the covariance kernel."""
    y = np.fft.irfft(noise_spectrum(grid, p) * np.fft.rfft(white, axis=-1), n=grid.points, axis=-1)
    y = y - y.mean(axis=-1, keepdims=True)
    # second pass removes the rounding left by the first
    return y - y.mean(axis=-1, keepdims=True)


def white_noise(rng_state, size: int) -> np.ndarray:
    """Standard normals from a Generator, an int seed, or a (master_seed, member,
    step) tuple addressing the simulation streams."""
    if isinstance(rng_state, (tuple, list)):
        if len(rng_state) != 3:
            raise ConfigError("rng_state tuples are (master_seed, member, step)")
        seed, member, step = rng_state
        return StreamFamily(seed, NOISE_STREAM).block(member, step, 1, size)[0]
    if not isinstance(rng_state, np.random.Generator):
        rng_state = np.random.default_rng(rng_state)
    return rng_state.standard_normal(size)


def sample_noise_array(grid: Grid1D, p: NoiseParams, rng) -> np.ndarray:
    if p.theta == 0:
        return np.zeros(grid.points)
    check_resolved(grid, p)
    return synthesize(grid, p, white_noise(rng, grid.points))


@dataclass(frozen=True)
class NoiseField(ScalarField):
    """One realization Y(q); `values` has covariance C(delta). The field fed to
    the density equation over a step dt is values / sqrt(dt)."""

    params: NoiseParams = field(default_factory=NoiseParams)
    lambda_c: float = math.inf
    dt: float = 1.0
    seed: object = None

    @property
    def injected(self) -> np.ndarray:
        return self.values / math.sqrt(self.dt)


def sample_noise(grid: Grid1D, p: NoiseParams, dt: float, rng_state) -> NoiseField:
    if not dt > 0:
        raise ConfigError("dt must be positive", dt=dt)
    seed = rng_state if not isinstance(rng_state, np.random.Generator) else None
    y = sample_noise_array(grid, p, rng_state)
    return NoiseField(grid, y, params=p, lambda_c=correlation_length(p), dt=dt, seed=seed)


@dataclass
class CovarianceReport:
    lags: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    theoretical: np.ndarray
    fitted_lambda_c: float
    nominal_lambda_c: float
    max_abs_deviation: float
    n_samples: int

    def at(self, delta: float):
        """(empirical, theoretical, stderr) at the lag nearest to delta."""
        i = int(np.argmin(np.abs(self.lags - delta)))
        return self.empirical[i], self.theoretical[i], self.stderr[i]

    def rows(self):
        return zip(self.lags, self.empirical, self.theoretical, self.stderr)


def _gauss(d, a, ell, b):
    return a * np.exp(-(d / ell) ** 2) + b


def validate_noise(samples: Iterable[NoiseField], min_samples: int = 1000) -> CovarianceReport:
    """Empirical covariance against lag, averaged over positions and samples.

    `samples` may be any iterable (a generator keeps memory flat). The fitted
    correlation length comes from a + offset Gaussian fit, the offset soaking
    up the constant shift caused by the zero-mean projection.
    """
    grid = params = None
    acc = acc2 = None
    count = 0
    for s in samples:
        if grid is None:
            grid, params = s.grid, s.params
        elif s.grid != grid:
            raise InvalidFieldError("noise samples live on different grids")
        ac = np.fft.irfft(np.abs(np.fft.rfft(s.values)) ** 2, n=grid.points) / grid.points
        if acc is None:
            acc, acc2 = np.zeros_like(ac), np.zeros_like(ac)
        acc += ac
        acc2 += ac * ac
        count += 1
    if count < min_samples:
        raise InvalidFieldError(f"need at least {min_samples} samples, got {count}", samples=count)
    half = grid.points // 2 + 1
    mean = acc[:half] / count
    var = np.maximum(acc2[:half] / count - mean**2, 0.0)
    stderr = np.sqrt(var / max(count - 1, 1))
    lags = np.arange(half) * grid.spacing
    theo = covariance_kernel(lags, params)
    nominal = correlation_length(params)
    fitted = math.nan
    if np.any(mean != 0) and math.isfinite(nominal):
        sel = lags <= 3 * nominal
        try:
            popt, _ = curve_fit(_gauss, lags[sel], mean[sel], p0=(mean[0], nominal, 0.0))
            fitted = abs(float(popt[1]))
        except RuntimeError:
            pass
    return CovarianceReport(lags, mean, stderr, theo, fitted, nominal,
                            float(np.max(np.abs(mean - theo))), count)
