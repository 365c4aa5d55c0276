import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqha.classical_limit import (LimitReport, ScaledSetup, calibrate_kicks, classical_reference,
                                  compare_limit, default_kick_rate, fall_time, trajectory_divergence)
from sqha.dynamics import TracerEnsemble, gaussian_packet, stability_bound
from sqha.errors import ConfigError
from sqha.noise import NoiseParams
from sqha.potentials import PotentialSpec
from sqha.qpotential import DIVERGENT, QuantumParams
from sqha.spatial import Grid1D

QP = QuantumParams()
HARM = PotentialSpec.harmonic(1.0)
SETUP = ScaledSetup()


# classical reference

def test_harmonic_reference_conserves_modified_energy():
    # symplectic Euler conserves p^2/2m + k q^2/2 - (k dt / 2m) q p exactly for a linear force
    g = Grid1D(40.0, 256)
    dt = 1e-3
    out = classical_reference(HARM, TracerEnsemble([1.0, -2.0, 0.3], [0.0, 0.5, -1.0]), 0.0, dt, 1000, 0, g)
    h = np.array([0.5 * e.p**2 + 0.5 * e.q**2 - 0.5 * dt * e.q * e.p for e in out])
    assert np.max(np.abs(h / h[0] - 1)) < 1e-6
    # the plain energy only oscillates at O(dt), without secular drift
    e = np.array([0.5 * x.p**2 + 0.5 * x.q**2 for x in out])
    assert np.max(np.abs(e / e[0] - 1)) < 2 * dt


@given(st.floats(-19, 19), st.floats(-5, 5), st.integers(1, 300))
def test_free_reference_is_straight(q0, p0, steps):
    g = Grid1D(40.0, 64)
    dt = 0.01
    out = classical_reference(PotentialSpec.free(), TracerEnsemble([q0], [p0]), 0.0, dt, steps, 0, g)
    assert len(out) == steps + 1
    assert out[-1].p[0] == p0
    assert abs(g.wrap(out[-1].q[0] - (q0 + p0 * steps * dt))[()]) < 1e-10


def test_free_reference_momentum_diffusion():
    g = Grid1D(40.0, 64)
    dt, steps, rate = 0.01, 100, 0.7
    ens = TracerEnsemble(np.zeros(20_000), np.zeros(20_000))
    out = classical_reference(PotentialSpec.free(), ens, 0.35, dt, steps, 3, g, kick_rate=rate)
    t = np.array([e.t for e in out])
    var = np.array([np.mean(e.p**2) for e in out])
    slope = np.polyfit(t, var, 1)[0]
    assert abs(slope / rate - 1) < 0.05
    # default rate is 2 m k Theta
    out = classical_reference(PotentialSpec.free(), ens, 0.35, dt, steps, 3, g)
    assert abs(np.mean(out[-1].p ** 2) / (default_kick_rate(0.35) * steps * dt) - 1) < 0.05


def test_reference_rejects_bad_arguments():
    g = Grid1D(40.0, 64)
    ens = TracerEnsemble([0.0], [0.0])
    with pytest.raises(ConfigError):
        classical_reference(HARM, ens, 0.0, 0.0, 10, 0, g)
    with pytest.raises(ConfigError):
        classical_reference(HARM, ens, 0.0, 0.1, 10, 0, g, kick_rate=-1.0)


# helpers

def test_trajectory_divergence_of_identical_runs_is_zero():
    g = Grid1D(40.0, 64)
    out = classical_reference(HARM, TracerEnsemble(np.linspace(-3, 3, 40), np.zeros(40)), 0.0, 0.01, 50, 0, g)
    d, se = trajectory_divergence(out, out, g, np.ones(40, bool))
    assert d == 0 and se == 0


def test_trajectory_divergence_uses_minimum_image():
    g = Grid1D(40.0, 64)
    a = [TracerEnsemble([19.9], [0.0])]
    b = [TracerEnsemble([-19.9], [0.0])]
    d, _ = trajectory_divergence(a, b, g, np.ones(1, bool))
    assert d == pytest.approx(0.2 / 40)


def test_calibrate_kicks():
    a = [TracerEnsemble([0.0, 0.0], [0.0, 0.0], t=0.0), TracerEnsemble([0.0, 0.0], [1.0, -3.0], t=2.0)]
    b = [TracerEnsemble([0.0, 0.0], [0.0, 0.0], t=0.0), TracerEnsemble([0.0, 0.0], [0.0, 0.0], t=2.0)]
    assert calibrate_kicks(a, b) == pytest.approx(2.5)


def test_fall_time_harmonic_quarter_period():
    assert fall_time(HARM, 3.0, dt=1e-4) == pytest.approx(math.pi / 2, abs=2e-4)


def test_limit_report_invariant():
    with pytest.raises(ValueError):
        LimitReport(1.0, DIVERGENT, 100.0, (0.01, math.inf), 0.0, True)
    with pytest.raises(ValueError):
        LimitReport(1.0, 5.0, 10.0, (0.1, 0.5), 0.0, True)
    r = LimitReport(1.0, DIVERGENT, 10.0, (0.1, math.inf), 0.0, False)
    json.dumps(r.to_dict())


# compare_limit

def test_seed_pairing_without_quantum_force():
    g = Grid1D(32.0, 256)
    V = PotentialSpec.power_tail(1.0, 0.5)
    dt = stability_bound(g, V, QP)
    rep = compare_limit(V, QP, NoiseParams(0.0), g, dt, 200, 64, 5, gaussian_packet(g, 4.0, 0.5),
                        include_quantum=False)
    assert rep.trajectory_divergence < 1e-10
    assert rep.kick_rate == 0.0


def test_harmonic_is_never_classical():
    rep = SETUP.run(2.0, 100, 1, V=HARM)
    assert rep.lambda_q == DIVERGENT and not rep.classical_regime
    assert rep.scale_ratios[1] == math.inf


def test_compare_limit_rejects_large_dt():
    g = Grid1D(32.0, 256)
    with pytest.raises(ConfigError):
        compare_limit(HARM, QP, NoiseParams(0.5), g, 1.0, 10, 10, 0)


def test_unresolved_noise_rejected():
    g = Grid1D(32.0, 32)
    with pytest.raises(Exception) as exc:
        compare_limit(PotentialSpec.power_tail(1.0, 0.5), QP, NoiseParams(8.0), g,
                      stability_bound(g, PotentialSpec.power_tail(1.0, 0.5), QP), 10, 10, 0)
    assert exc.value.code == "UNRESOLVED_CORRELATION"


@pytest.fixture(scope="module")
def tail8():
    return SETUP.run(8.0, 400, 7)


def test_tail_system_is_classical_at_large_scale(tail8):
    assert tail8.classical_regime
    assert tail8.scale_ratios[0] < 0.1 and tail8.scale_ratios[1] < 0.1
    assert tail8.force_ratio < 0.1


def test_tail_diverges_less_than_harmonic(tail8):
    V = PotentialSpec.harmonic(math.sqrt(SETUP.potential.gradient(np.array([32.0]))[0] / 32.0))
    harm = SETUP.run(8.0, 400, 7, V=V)
    assert not harm.classical_regime
    assert tail8.trajectory_divergence < harm.trajectory_divergence


def test_shrunk_system_diverges_more(tail8):
    small = SETUP.run(0.8, 400, 7)
    print(f"s=0.8 ratios={small.scale_ratios} D={small.trajectory_divergence:.4g}")
    assert small.trajectory_divergence > tail8.trajectory_divergence + 2 * math.hypot(
        small.divergence_stderr, tail8.divergence_stderr)
