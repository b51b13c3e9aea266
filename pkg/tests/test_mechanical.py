from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavityspec.mechanical import (
    BandsOverlap,
    MechParams,
    TooFewEvents,
    mass_energy,
    piston_events,
    piston_signal,
    simulate_mass,
    spectral_weights,
    weight_ratio,
)
from cavityspec.presets import FIG5_MECH

T = np.arange(0, 50001) * 0.02


def test_no_jumps_gives_pure_sinusoid():
    t = np.linspace(0, 100, 5001)
    np.testing.assert_allclose(piston_signal(FIG5_MECH, t, seed=3), np.cos(4.0 * t), atol=1e-15)


def test_static_piston_is_piecewise_constant():
    m = MechParams(2.0, 2.0, 0.2, 0.0, jump_rate=0.5, amplitude=1.5)
    t = np.linspace(0, 200, 20001)
    f = piston_signal(m, t, seed=4)
    assert np.all(np.abs(f) <= 1.5)
    levels = np.unique(f)
    times, _ = piston_events(m, 0, 200, seed=4)
    assert len(levels) <= len(times) + 1
    assert np.count_nonzero(np.diff(f)) <= len(times)


def test_event_count_is_poisson():
    times, phases = piston_events(FIG5_MECH.replace(jump_rate=1.0), 0.0, 1000.0, seed=11)
    assert abs(len(times) - 1000) < 3 * math.sqrt(1000)
    assert np.all(np.diff(times) >= 0)
    assert np.all((phases >= 0) & (phases < 2 * math.pi))


def test_signal_deterministic_per_seed():
    m = FIG5_MECH.replace(jump_rate=1.0)
    a = piston_signal(m, T[:5000], seed=8)
    b = piston_signal(m, T[:5000], seed=8)
    assert a.tobytes() == b.tobytes()


def test_statics():
    m = MechParams(3.0, 1.0, 0.5, 0.0)
    t = np.linspace(0, 60, 6001)
    x = simulate_mass(m, np.full_like(t, 2.0), t)
    assert x[0] == 0
    assert x[-1] == pytest.approx(1.0 * 2.0 / 4.0, rel=1e-6)


def test_free_oscillator_frequency():
    m = MechParams(2.0, 2.0, 0.0, 0.0)
    t = np.linspace(0, 40, 40001)
    x = simulate_mass(m, np.zeros_like(t), t, x0=1.0)
    np.testing.assert_allclose(x, np.cos(2.0 * t), atol=1e-9)
    up = np.where((x[:-1] < 0) & (x[1:] >= 0))[0]
    crossings = t[up] - x[up] * (t[up + 1] - t[up]) / (x[up + 1] - x[up])
    omega = 2 * math.pi / np.mean(np.diff(crossings))
    assert omega == pytest.approx(2.0, rel=1e-4)


def test_steady_state_amplitude():
    m = FIG5_MECH
    t = np.arange(0, 20001) * 0.01
    x = simulate_mass(m, piston_signal(m, t, 0), t)
    tail = x[t > 150]
    expected = m.g_c * m.amplitude / abs(m.k_c + m.g_c - m.drive_freq**2 + 1j * m.kappa_c * m.drive_freq)
    assert 0.5 * (tail.max() - tail.min()) == pytest.approx(expected, rel=1e-3)


@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), st.integers(0, 1000))
def test_linearity(c, seed):
    m = FIG5_MECH.replace(jump_rate=0.5)
    t = T[:5001]
    f = piston_signal(m, t, seed)
    x1 = simulate_mass(m, f, t)
    xc = simulate_mass(m, c * f, t)
    np.testing.assert_allclose(xc, c * x1, rtol=1e-9, atol=1e-12 * abs(c))


def test_energy_decays_without_drive():
    m = MechParams(2.0, 2.0, 0.2, 0.0)
    t = np.linspace(0, 50, 50001)
    x = simulate_mass(m, np.zeros_like(t), t, x0=1.0)
    e = mass_energy(m, x, t)[1:-1]
    # the central-difference velocity adds O(dt^2) ripple on top of the decay
    assert np.all(np.diff(e[::100]) < 0)
    assert e[-1] < 1e-3 * e[0]


def test_detuned_drive_has_no_eigen_weight():
    r = weight_ratio(FIG5_MECH, T, seed=0, discard=100.0)
    assert r < 1e-2


def test_jumps_feed_eigenmode():
    r = [np.mean([weight_ratio(FIG5_MECH.replace(jump_rate=j), T, seed=s, discard=100.0) for s in range(5)])
         for j in (0.0, 0.1, 1.0)]
    assert r[0] < r[1] < r[2]


def test_bands_overlap_guard():
    m = MechParams(2.0, 2.0, 0.2, 2.3)
    x = np.zeros_like(T)
    with pytest.raises(BandsOverlap):
        spectral_weights(x, m, T)


def test_too_few_events_guard():
    m = FIG5_MECH.replace(jump_rate=0.01)
    t = T[:100001]
    with pytest.raises(TooFewEvents):
        spectral_weights(np.zeros_like(t), m, t)


def test_parameter_validation():
    with pytest.raises(ValueError):
        MechParams(-1.0, 2.0, 0.2, 4.0)
    with pytest.raises(ValueError):
        MechParams(1.0, 2.0, 0.2, float("nan"))
    assert FIG5_MECH.eigenfrequency == 2.0
    # five band-widths between drive and eigenfrequency
    assert abs(FIG5_MECH.drive_freq - FIG5_MECH.eigenfrequency) == pytest.approx(10 * FIG5_MECH.kappa_c)
