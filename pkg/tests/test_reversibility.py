import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqha.config import GridConfig, InitConfig, RunConfig
from sqha.dynamics import SimState, gaussian_packet
from sqha.errors import ConfigError
from sqha.reversibility import (AsymmetryResult, asymmetry_scan, reversal_asymmetry, time_reverse,
                                write_scan_csv)
from sqha.spatial import Grid1D, WaveField

SMALL = RunConfig(grid=GridConfig(128, 20.0), init=InitConfig(0.0, 1.0, 1.0))
HORIZON = 0.3


def mean_momentum(psi: WaveField):
    """<p> = hbar sum_k k |psi_k|^2; the unpaired Nyquist mode carries no momentum."""
    g = psi.grid
    pk = np.abs(np.fft.fft(psi.values)) ** 2
    k = g.k.copy()
    k[g.points // 2] = 0.0
    return float(np.sum(k * pk) / np.sum(pk))


@given(st.floats(-3, 3), st.floats(0.5, 2), st.floats(-4, 4))
def test_time_reverse_involution_and_invariants(center, sigma, k0):
    g = Grid1D(20.0, 128)
    s = SimState(gaussian_packet(g, center, sigma, k0))
    r = time_reverse(s)
    assert np.array_equal(time_reverse(r).psi.values, s.psi.values)
    assert np.array_equal(r.density(), s.density())
    assert mean_momentum(r.psi) == pytest.approx(-mean_momentum(s.psi), abs=1e-12)


def test_real_wavefunction_unchanged():
    g = Grid1D(20.0, 128)
    s = SimState(gaussian_packet(g, 1.0, 1.0, 0.0))
    assert np.array_equal(time_reverse(s).psi.values, s.psi.values)


def test_plane_wave_flips():
    g = Grid1D(20.0, 128)
    k0 = 2 * np.pi * 3 / g.length
    psi = WaveField.normalized(g, np.exp(1j * k0 * g.q))
    r = time_reverse(SimState(psi)).psi
    assert np.allclose(r.values, np.exp(-1j * k0 * g.q) / math.sqrt(g.length), atol=1e-15)
    assert mean_momentum(psi) == pytest.approx(k0, rel=1e-12)
    assert mean_momentum(r) == pytest.approx(-mean_momentum(psi), abs=1e-12)


def test_baseline_is_integrator_level():
    r = reversal_asymmetry(SMALL, 0.0, HORIZON, 30, 1)
    assert r.mean < 1e-8 and r.stderr == 0.0 and r.trials == 30


def test_baseline_stays_at_round_off_when_dt_halves():
    # the symmetric splitting is exactly reversible, so the baseline is round-off
    base = reversal_asymmetry(SMALL, 0.0, HORIZON, 1, 1).mean
    cfg = RunConfig.from_dict({**SMALL.to_dict(), "dt": SMALL.resolve_dt()[0] / 2})
    half = reversal_asymmetry(cfg, 0.0, HORIZON, 1, 1).mean
    assert base < 1e-12 and half < 1e-12


def test_noise_breaks_reversal():
    base = reversal_asymmetry(SMALL, 0.0, HORIZON, 30, 1)
    r = reversal_asymmetry(SMALL, 1e-3, HORIZON, 30, 1)
    assert all(a > 0 for a in r.values)
    assert r.mean > base.mean + 5 * r.stderr


def test_scan_monotone_within_two_stderr():
    res = asymmetry_scan(SMALL, [0.0, 3e-4, 1e-3, 3e-3], HORIZON, 30, 4)
    for a, b in zip(res, res[1:]):
        assert b.mean >= a.mean - 2 * math.hypot(a.stderr, b.stderr)


def test_disjoint_seed_groups_agree():
    a = reversal_asymmetry(SMALL, 1e-3, HORIZON, 40, 100)
    b = reversal_asymmetry(SMALL, 1e-3, HORIZON, 40, 200)
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.stderr, b.stderr)


def test_jobs_do_not_change_results():
    a = reversal_asymmetry(SMALL, 1e-3, HORIZON, 40, 7, jobs=1, chunk=10)
    b = reversal_asymmetry(SMALL, 1e-3, HORIZON, 40, 7, jobs=2, chunk=10)
    c = reversal_asymmetry(SMALL, 1e-3, HORIZON, 40, 7, jobs=1, chunk=40)
    assert a.values == b.values == c.values


def test_replay_noise_mode_runs():
    r = reversal_asymmetry(SMALL, 1e-3, HORIZON, 5, 7, replay_noise=True)
    fresh = reversal_asymmetry(SMALL, 1e-3, HORIZON, 5, 7)
    assert r.values != fresh.values and all(a >= 0 for a in r.values)


def test_baseline_only_scan(tmp_path):
    res = asymmetry_scan(SMALL, [0.0], HORIZON, 10, 3)
    assert len(res) == 1 and res[0].mean < 1e-8
    write_scan_csv(res, tmp_path / "scan.csv")
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert lines[0].startswith("theta [E/k],mean_A [1],stderr_A [1]")
    assert len(lines) == 2


def test_scan_csv_is_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        write_scan_csv(asymmetry_scan(SMALL, [0.0, 1e-3], HORIZON, 10, 5), tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_failed_theta_recorded_and_scan_continues():
    # a huge mobility makes the kick clip more than the allowed mass
    d = SMALL.to_dict()
    d["noise"]["mobility"] = 1e8
    res = asymmetry_scan(RunConfig.from_dict(d), [0.0, 0.5, 0.6], HORIZON, 3, 5)
    assert res[0].error is None and res[0].mean < 1e-8
    assert [r.error for r in res[1:]] == ["dynamics.NOISE_TOO_STRONG"] * 2
    assert all(math.isnan(r.mean) for r in res[1:])


@pytest.mark.parametrize("grid", [[0.0, 0.2, 0.1], [0.1, 0.2], [], [0.0, 0.0]])
def test_bad_theta_grid(grid):
    with pytest.raises(ConfigError):
        asymmetry_scan(SMALL, grid, HORIZON, 3, 0)


def test_trials_must_be_positive():
    with pytest.raises(ConfigError):
        reversal_asymmetry(SMALL, 0.0, HORIZON, 0, 0)


def test_result_fidelity_column():
    r = reversal_asymmetry(SMALL, 1e-3, HORIZON, 5, 1)
    assert isinstance(r, AsymmetryResult)
    assert 0 <= r.mean_fidelity_deficit < 1
