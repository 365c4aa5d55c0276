"""Periodic 1-D grids, field containers, derivatives and quadrature."""
from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import InvalidFieldError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-length/2, length/2) with `points` nodes."""

    length: float
    points: int

    def __post_init__(self):
        if self.points < 16 or self.points % 2:
            raise InvalidFieldError("grid needs an even number of points >= 16", points=self.points)
        if not (np.isfinite(self.length) and self.length > 0):
            raise InvalidFieldError("grid length must be positive and finite", length=self.length)

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @functools.cached_property
    def q(self) -> np.ndarray:
        q = -0.5 * self.length + self.spacing * np.arange(self.points)
        q.flags.writeable = False
        return q

    @functools.cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        k = 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        k.flags.writeable = False
        return k

    def wrap(self, x):
        """Map positions back into [-L/2, L/2)."""
        return (np.asarray(x) + 0.5 * self.length) % self.length - 0.5 * self.length


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise InvalidFieldError(f"field has {bad} non-finite values", nonfinite=bad)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.points,):
            raise InvalidFieldError("field length does not match grid", shape=str(v.shape))
        _check_finite(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def to_csv(self, path, value_header="value"):
        write_profile_csv(path, self.grid.q, {value_header: self.values})


@dataclass(frozen=True)
class DensityField(ScalarField):
    """Nonnegative density normalized to one on its grid."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise InvalidFieldError("density has negative values", min=float(self.values.min()))
        mass = integrate(self)
        if abs(mass - 1.0) > NORM_TOL:
            raise InvalidFieldError("density is not normalized", mass=mass)

    @classmethod
    def normalized(cls, grid: Grid1D, values) -> "DensityField":
        v = np.asarray(values, dtype=float)
        _check_finite(v)
        if np.any(v < 0):
            raise InvalidFieldError("density has negative values", min=float(v.min()))
        mass = grid.spacing * v.sum()
        if mass <= 0:
            raise InvalidFieldError("density has zero mass")
        return cls(grid, v / mass)


@dataclass(frozen=True)
class WaveField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.points,):
            raise InvalidFieldError("field length does not match grid", shape=str(v.shape))
        _check_finite(v)
        norm = self.grid.spacing * np.sum(np.abs(v) ** 2)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidFieldError("wavefunction is not normalized", norm=norm)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid: Grid1D, values) -> "WaveField":
        v = np.asarray(values, dtype=complex)
        _check_finite(v)
        norm = grid.spacing * np.sum(np.abs(v) ** 2)
        if norm <= 0:
            raise InvalidFieldError("wavefunction has zero norm")
        return cls(grid, v / np.sqrt(norm))

    def density(self) -> DensityField:
        return DensityField.normalized(self.grid, np.abs(self.values) ** 2)


def spectral_derivative(values: np.ndarray, k: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative of a real periodic array by FFT. The Nyquist mode is zeroed for
    odd orders so the result stays real."""
    fk = np.fft.rfft(values)
    kr = k[: fk.size].copy()
    kr[-1] = abs(kr[-1])
    mult = (1j * kr) ** order
    if order % 2:
        mult[-1] = 0.0
    return np.fft.irfft(fk * mult, n=values.size)


def central_derivative(values: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    fp = np.roll(values, -1)
    fm = np.roll(values, 1)
    if order == 1:
        return (fp - fm) / (2 * h)
    return (fp - 2 * values + fm) / (h * h)


def derivative(f: ScalarField, order: Literal[1, 2] = 1,
               scheme: Literal["spectral", "central"] = "spectral") -> ScalarField:
    """First or second derivative of a periodic field."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    _check_finite(f.values)
    if scheme == "spectral":
        out = spectral_derivative(f.values, f.grid.k, order)
    elif scheme == "central":
        out = central_derivative(f.values, f.grid.spacing, order)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ScalarField(f.grid, out)


def integrate(f) -> float:
    """Periodic rectangle rule h * sum(f)."""
    values = f.values if hasattr(f, "values") else np.asarray(f)
    _check_finite(values)
    return float(f.grid.spacing * np.sum(values))


def write_profile_csv(path, q, columns: dict, q_header="q"):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([q_header, *columns])
        cols = [np.asarray(c) for c in columns.values()]
        for i, qi in enumerate(q):
            w.writerow([fmt(qi), *(fmt(c[i]) for c in cols)])


def fmt(x) -> str:
    """Round-trip float formatting for CSV output."""
    return repr(float(x))
