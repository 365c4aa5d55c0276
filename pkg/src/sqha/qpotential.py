"""Bohm quantum potential, quantum force, quantum energy and the
range-of-interaction analysis."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DegenerateDenominatorError, InvalidFieldError
from .spatial import DensityField, ScalarField, spectral_derivative

RELATIVE_FLOOR = 1e-12


@dataclass(frozen=True)
class QuantumParams:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ConfigError("hbar and mass must be strictly positive",
                              hbar=self.hbar, mass=self.mass)


def default_floor(n_values) -> float:
    return RELATIVE_FLOOR * float(np.max(n_values))


def _density_values(n):
    v = n.values if isinstance(n, ScalarField) else np.asarray(n, dtype=float)
    if np.any(v < 0):
        raise InvalidFieldError("density has negative values", min=float(v.min()))
    return v


def quantum_potential_array(n: np.ndarray, k: np.ndarray, p: QuantumParams,
                            floor: float | None = None) -> np.ndarray:
    """V_qu = -(hbar^2/2m) R''/R with R = sqrt(n + floor).

    The floor is added rather than clipped: a hard max() leaves a kink in R whose
    spectral second derivative rings across the whole domain.
    """
    if floor is None:
        floor = RELATIVE_FLOOR * n.max(axis=-1, keepdims=True)
    r = np.sqrt(n + floor)
    return -(p.hbar**2 / (2 * p.mass)) * spectral_derivative(r, k, 2) / r


def quantum_force_array(n: np.ndarray, k: np.ndarray, p: QuantumParams,
                        floor: float | None = None) -> np.ndarray:
    """-dV_qu/dq = (hbar^2/2m) (R'''R - R''R') / R^2, evaluated pointwise.

    Analytically the same as differentiating V_qu, but local: round-off in the
    floor-dominated tails of V_qu does not leak into the bulk through a global
    spectral derivative.
    """
    if floor is None:
        floor = RELATIVE_FLOOR * n.max(axis=-1, keepdims=True)
    r = np.sqrt(n + floor)
    d1 = spectral_derivative(r, k, 1)
    d2 = spectral_derivative(r, k, 2)
    d3 = spectral_derivative(r, k, 3)
    return (p.hbar**2 / (2 * p.mass)) * (d3 * r - d2 * d1) / (r * r)


def quantum_potential(n: DensityField, p: QuantumParams, floor: float | None = None) -> ScalarField:
    v = _density_values(n)
    if floor is not None and floor <= 0:
        raise ValueError("floor must be positive")
    return ScalarField(n.grid, quantum_potential_array(v, n.grid.k, p, floor))


def quantum_force(n: DensityField, p: QuantumParams, floor: float | None = None) -> ScalarField:
    """-dV_qu/dq."""
    v = _density_values(n)
    if floor is not None and floor <= 0:
        raise ValueError("floor must be positive")
    return ScalarField(n.grid, quantum_force_array(v, n.grid.k, p, floor))


def quantum_energy(n: DensityField, p: QuantumParams, floor: float | None = None) -> float:
    """Integral of n * V_qu over the grid."""
    vq = quantum_potential(n, p, floor)
    return float(n.grid.spacing * np.sum(n.values * vq.values))


def fisher_energy(n: DensityField, p: QuantumParams, floor: float | None = None) -> float:
    """(hbar^2/8m) * integral (n')^2 / n. Equal to quantum_energy after integration
    by parts; used as an independent cross-check."""
    v = _density_values(n)
    if floor is None:
        floor = default_floor(v)
    dn = spectral_derivative(v, n.grid.k, 1)
    return float(p.hbar**2 / (8 * p.mass) * n.grid.spacing * np.sum(dn**2 / (v + floor)))


# --- range of interaction ----------------------------------------------------

DIVERGENT = "DIVERGENT"
RATIO_THRESHOLD = 0.5
RELIABLE_DENSITY = 1e-8  # relative density above which V_qu is trusted
DEFAULT_LAMBDA_C = 1.0


@dataclass
class RangeReport:
    """Range of interaction lambda_q = 2 * numerator / denominator with

    numerator   = integral_0^q_max |q^-1 dV_qu/dq| dq
    denominator = |dV_qu/dq|(lambda_c) / lambda_c

    tail_ratio compares the integral over [q_max/2, q_max] with the one over
    [0, q_max/2]; it stays near 1 for a constant integrand and falls toward 0
    when the tail decays.
    """

    lambda_q: float | str
    integral_value: float
    denominator: float
    tail_ratio: float
    tail_exponent_estimate: float
    converged: bool
    q_max: float
    lambda_c: float
    potential: str | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.converged == (self.lambda_q == DIVERGENT):
            raise ValueError("converged must be False exactly when lambda_q is DIVERGENT")

    @property
    def divergent(self) -> bool:
        return self.lambda_q == DIVERGENT

    def to_dict(self) -> dict:
        return asdict(self)


def _integrate_segment(x, y, a, b):
    sel = (x >= a) & (x <= b)
    xs, ys = x[sel], y[sel]
    if xs.size < 2:
        return 0.0
    return float(np.trapezoid(ys, xs))


def range_integrand(vq: ScalarField):
    """(q, |q^-1 dV_qu/dq|, dV_qu/dq) on the nodes q >= 0; the q = 0 value is
    the limit |V_qu''(0)|."""
    g = vq.grid
    dv = spectral_derivative(vq.values, g.k, 1)
    d2v = spectral_derivative(vq.values, g.k, 2)
    q = g.q
    pos = q >= 0
    qp_, dvp = q[pos], dv[pos]
    integrand = np.empty_like(qp_)
    nz = qp_ > 0
    integrand[nz] = np.abs(dvp[nz] / qp_[nz])
    integrand[~nz] = abs(d2v[pos][~nz][0]) if np.any(~nz) else 0.0
    return qp_, integrand, dvp


def interaction_range(vq: ScalarField, lambda_c: float, q_max: float | None = None,
                      threshold: float = RATIO_THRESHOLD) -> RangeReport:
    """Quantum-potential range of interaction with a two-interval divergence test.

    q_max defaults to 0.45 of the domain length. The tail exponent is the
    log-log slope of the integrand over [q_max/2, q_max].
    """
    g = vq.grid
    if q_max is None:
        q_max = 0.45 * g.length
    if not 0 < q_max <= 0.5 * g.length:
        raise ConfigError("q_max must lie inside the half domain", q_max=q_max)
    if not 0 < lambda_c < q_max:
        raise ConfigError("lambda_c must lie inside (0, q_max)", lambda_c=lambda_c, q_max=q_max)
    q, integrand, dv = range_integrand(vq)
    grad_at_lc = abs(float(np.interp(lambda_c, q, dv)))
    if grad_at_lc < 1e-14:
        raise DegenerateDenominatorError("|dV_qu/dq| vanishes at lambda_c",
                                         gradient=grad_at_lc, lambda_c=lambda_c)
    denom = grad_at_lc / lambda_c
    head = _integrate_segment(q, integrand, 0.0, 0.5 * q_max)
    tail = _integrate_segment(q, integrand, 0.5 * q_max, q_max)
    total = head + tail
    ratio = tail / head if head > 0 else math.inf
    sel = (q >= 0.5 * q_max) & (q <= q_max) & (integrand > 0)
    slope = math.nan
    if np.count_nonzero(sel) >= 2:
        slope = float(np.polyfit(np.log(q[sel]), np.log(integrand[sel]), 1)[0])
    converged = bool(ratio <= threshold)
    lam = 2 * total / denom if converged else DIVERGENT
    return RangeReport(lam, total, denom, float(ratio), slope, converged, float(q_max), float(lambda_c))


def reliable_extent(n: np.ndarray, q: np.ndarray, rel: float = RELIABLE_DENSITY) -> float:
    """Largest q >= 0 such that the density stays above rel * max on [0, q]."""
    pos = q >= 0
    qp_, np_ = q[pos], n[pos]
    below = np.nonzero(np_ < rel * n.max())[0]
    if below.size == 0:
        return float(qp_[-1])
    return float(qp_[max(below[0] - 1, 1)])


def classify_tail(spec, p: QuantumParams, grid=None, lambda_c: float = DEFAULT_LAMBDA_C,
                  threshold: float = RATIO_THRESHOLD) -> RangeReport:
    """Relax to the ground state of `spec`, compute V_qu and its range report.

    The integration limit is min(0.45 L, extent where the density exceeds
    1e-8 of its peak): beyond that V_qu is dominated by the density floor.
    """
    from .dynamics import relax_ground_state
    from .spatial import Grid1D

    if grid is None:
        grid = Grid1D(80.0, 1024)
    psi = relax_ground_state(spec, p, grid)
    n = np.abs(psi.values) ** 2
    vq = ScalarField(grid, quantum_potential_array(n, grid.k, p))
    q_max = min(0.45 * grid.length, reliable_extent(n, grid.q))
    rep = interaction_range(vq, lambda_c, q_max, threshold)
    rep.potential = str(spec)
    rep.kappa = spec.tail_exponent
    return rep
