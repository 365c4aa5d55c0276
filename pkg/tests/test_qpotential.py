import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian_density
from sqha.errors import ConfigError, DegenerateDenominatorError, InvalidFieldError, NonConfiningError
from sqha.potentials import PotentialSpec
from sqha.qpotential import (DIVERGENT, QuantumParams, RangeReport, classify_tail, fisher_energy,
                             interaction_range, quantum_energy, quantum_force, quantum_potential)
from sqha.spatial import DensityField, Grid1D, ScalarField, derivative

QP = QuantumParams()


def gaussian(grid, sigma=1.0, center=0.0):
    return DensityField(grid, gaussian_density(grid, sigma, center))


def test_quantum_params_positive():
    with pytest.raises(ConfigError):
        QuantumParams(hbar=0.0)
    with pytest.raises(ConfigError):
        QuantumParams(mass=-1.0)


def test_uniform_density_has_zero_potential_force_energy():
    g = Grid1D(40.0, 256)
    n = DensityField(g, np.full(256, 1 / 40.0))
    assert np.max(np.abs(quantum_potential(n, QP).values)) < 1e-12
    assert np.max(np.abs(quantum_force(n, QP).values)) < 1e-12
    assert abs(quantum_energy(n, QP)) < 1e-12


def test_gaussian_potential_matches_closed_form(grid40):
    vq = quantum_potential(gaussian(grid40), QP).values
    sel = np.abs(grid40.q) <= 4
    q = grid40.q[sel]
    assert np.max(np.abs(vq[sel] - (0.25 - q**2 / 8))) < 1e-6


def test_gaussian_potential_is_quadratic(grid40):
    vq = quantum_potential(gaussian(grid40), QP).values
    sel = np.abs(grid40.q) <= 4
    coef = np.polyfit(grid40.q[sel], vq[sel], 2)
    resid = vq[sel] - np.polyval(coef, grid40.q[sel])
    assert np.max(np.abs(resid)) < 1e-6


def test_gaussian_force_is_linear_with_slope_quarter(grid40):
    f = quantum_force(gaussian(grid40), QP).values
    sel = np.abs(grid40.q) <= 4
    slope, icpt = np.polyfit(grid40.q[sel], f[sel], 1)
    assert abs(slope - 0.25) < 1e-6 and abs(icpt) < 1e-6


def test_force_vanishes_at_symmetric_maximum():
    g = Grid1D(40.0, 512)
    x = g.q
    n = np.exp(-x**2 / 2) + 0.5 * np.exp(-(x - 3) ** 2) + 0.5 * np.exp(-(x + 3) ** 2)
    n = DensityField.normalized(g, n)
    f = quantum_force(n, QP).values
    assert abs(f[g.points // 2]) < 1e-8


def test_gaussian_energy_closed_form(grid40):
    n = gaussian(grid40)
    assert abs(quantum_energy(n, QP) - 0.125) < 1e-6
    assert abs(fisher_energy(n, QP) - quantum_energy(n, QP)) < 1e-8


def test_sharper_density_has_more_energy(grid40):
    assert quantum_energy(gaussian(grid40, 0.5), QP) > quantum_energy(gaussian(grid40, 1.0), QP)


def test_negative_density_rejected():
    g = Grid1D(10.0, 32)
    with pytest.raises(InvalidFieldError):
        quantum_potential(ScalarField(g, np.linspace(-1, 1, 32)), QP)


@given(st.floats(0.6, 2.5), st.floats(-3, 3))
def test_fisher_form_agrees(sigma, center):
    g = Grid1D(40.0, 1024)
    n = gaussian(g, sigma, center)
    assert abs(quantum_energy(n, QP) - fisher_energy(n, QP)) < 1e-8
    assert abs(quantum_energy(n, QP) - 1 / (8 * sigma**2)) < 1e-6


@given(st.floats(0.6, 2.0), st.floats(0.3, 3.0))
def test_hbar_scaling(sigma, hbar):
    g = Grid1D(40.0, 512)
    n = gaussian(g, sigma)
    a = quantum_potential(n, QuantumParams(hbar=hbar)).values
    b = quantum_potential(n, QuantumParams(hbar=2 * hbar)).values
    assert np.allclose(b, 4 * a, rtol=1e-14, atol=0)


@given(st.integers(-40, 40), st.floats(0.6, 2.0))
def test_translation_covariance(shift, sigma):
    g = Grid1D(40.0, 256)
    base = gaussian_density(g, sigma) * (1 + 0.2 * np.cos(2 * np.pi * g.q / 40))
    a = quantum_potential(DensityField.normalized(g, base), QP).values
    b = quantum_potential(DensityField.normalized(g, np.roll(base, shift)), QP).values
    # round-off is amplified where the floor dominates, so compare where n is trusted
    trusted = np.roll(base, shift) > 1e-6 * base.max()
    assert np.max(np.abs(np.roll(a, shift) - b)[trusted]) < 1e-10


@given(st.floats(0.2, 4.0), st.floats(-0.5, 0.5), st.floats(-10, 10))
def test_force_is_minus_gradient_of_potential(a, b, shift):
    # smooth periodic densities that never reach the regularization floor
    g = Grid1D(20.0, 256)
    x = 2 * np.pi * (g.q - shift) / g.length
    n = DensityField.normalized(g, np.exp(a * np.cos(x) + b * np.sin(2 * x)))
    for scheme in ("spectral", "central"):
        dv = derivative(quantum_potential(n, QP), 1, scheme).values
        f = quantum_force(n, QP).values
        tol = 1e-10 if scheme == "spectral" else 0.05 * np.max(np.abs(f))
        assert np.max(np.abs(f + dv)) < tol


def test_force_accurate_in_bulk(grid40):
    f = quantum_force(gaussian(grid40), QP).values
    sel = np.abs(grid40.q) <= 4
    assert np.max(np.abs(f[sel] - grid40.q[sel] / 4)) < 1e-6


# range of interaction

def constant_integrand_field(g, slope=1.0):
    return ScalarField(g, -0.5 * slope * g.q**2 * np.exp(-((g.q / (0.48 * g.length)) ** 40)))


def test_quadratic_potential_is_divergent():
    g = Grid1D(80.0, 1024)
    rep = interaction_range(constant_integrand_field(g), 1.0)
    assert rep.lambda_q == DIVERGENT and not rep.converged
    assert rep.tail_ratio > 0.9


def test_decaying_tail_converges():
    g = Grid1D(80.0, 1024)
    vq = ScalarField(g, 1 / np.sqrt(1 + g.q**2))
    rep = interaction_range(vq, 1.0)
    assert rep.converged and isinstance(rep.lambda_q, float) and rep.lambda_q > 0
    assert rep.tail_ratio < 0.3


def test_zero_field_is_degenerate():
    g = Grid1D(20.0, 128)
    with pytest.raises(DegenerateDenominatorError):
        interaction_range(ScalarField(g, np.zeros(128)), 1.0)


def test_range_rejects_bad_limits():
    g = Grid1D(20.0, 128)
    vq = ScalarField(g, g.q**2)
    with pytest.raises(ConfigError):
        interaction_range(vq, 1.0, q_max=15.0)
    with pytest.raises(ConfigError):
        interaction_range(vq, 9.5, q_max=9.0)


def test_range_report_invariant():
    with pytest.raises(ValueError):
        RangeReport(DIVERGENT, 1.0, 1.0, 0.9, -1.0, True, 10.0, 1.0)
    with pytest.raises(ValueError):
        RangeReport(3.0, 1.0, 1.0, 0.1, -1.0, False, 10.0, 1.0)


def test_classify_harmonic_divergent():
    rep = classify_tail(PotentialSpec.harmonic(1.0), QP)
    assert rep.divergent and rep.tail_ratio > 0.9
    assert rep.kappa == 2


def test_classify_half_power_converged():
    rep = classify_tail(PotentialSpec.power_tail(1.0, 0.5), QP)
    assert rep.converged and rep.tail_ratio < 0.3
    assert math.isfinite(rep.lambda_q)


def test_classify_lennard_jones_like_converged():
    rep = classify_tail(PotentialSpec.lennard_jones_like(5.0, 1.0), QP)
    assert rep.converged


def test_classify_two_thirds_boundary_is_recorded():
    # boundary case: recorded only
    rep = classify_tail(PotentialSpec.power_tail(1.0, 2 / 3), QP)
    print(f"kappa=2/3: lambda_q={rep.lambda_q} tail_ratio={rep.tail_ratio:.3f}")


def test_classify_free_rejected():
    with pytest.raises(NonConfiningError):
        classify_tail(PotentialSpec.free(), QP)
