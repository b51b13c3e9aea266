from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from cavityspec.closed_form import (
    closed_form_norms,
    closed_form_spectra,
    propagator_columns,
    solve_amplitudes,
)
from cavityspec.model import SystemParams, system_matrix


def _ode_oracle(p: SystemParams, t_end: float):
    def rhs(t, y):
        e = y[0] + 1j * y[1]
        c = y[2] + 1j * y[3]
        ph = np.exp(1j * p.delta * t)
        de = -1j * p.g0 * ph * c - p.gamma * e
        dc = -1j * p.g0 * np.conj(ph) * e - p.kappa * c
        return [de.real, de.imag, dc.real, dc.imag]

    sol = solve_ivp(rhs, (0, t_end), [1, 0, 0, 0], method="DOP853", rtol=1e-12, atol=1e-14)
    y = sol.y[:, -1]
    return y[0] + 1j * y[1], y[2] + 1j * y[3]


def test_initial_condition(fig2):
    tr = solve_amplitudes(fig2, [0.0])
    assert tr.e[0] == 1 and tr.c[0] == 0


def test_decoupled_decay():
    p = SystemParams(0.0, 1.6, 0.32, 0.0, 7.0)
    t = np.linspace(0, 5, 51)
    tr = solve_amplitudes(p, t)
    np.testing.assert_allclose(tr.e, np.exp(-0.32 * t), rtol=1e-13)
    np.testing.assert_array_equal(tr.c, 0)


def test_quarter_rabi_period_vs_ode(fig2):
    t = math.pi / (2 * 7.9743)
    e_ref, c_ref = _ode_oracle(fig2, t)
    tr = solve_amplitudes(fig2, [t])
    assert abs(tr.e[0] - e_ref) < 1e-9
    assert abs(tr.c[0] - c_ref) < 1e-9
    # most of the excitation has moved into the cavity
    assert abs(tr.c[0]) ** 2 > 0.6


@pytest.mark.parametrize("delta", [-20.0, 3.0, 40.0])
def test_detuned_vs_ode(fig2, delta):
    p = fig2.replace(delta=delta)
    e_ref, c_ref = _ode_oracle(p, 0.7)
    tr = solve_amplitudes(p, [0.7])
    assert abs(tr.e[0] - e_ref) < 1e-9
    assert abs(tr.c[0] - c_ref) < 1e-9


def test_propagator_matches_expm_near_exceptional_point():
    # g0 = (kappa - gamma)/2 puts the two eigenvalues on top of each other
    for g0 in (0.64, 0.64 + 1e-9, 0.64 - 1e-7):
        p = SystemParams(g0, 1.6, 0.32)
        for t in (0.01, 1.0, 7.5):
            ref = expm(system_matrix(p) * t)
            got = np.array(propagator_columns(p, t), dtype=complex).reshape(2, 2)
            np.testing.assert_allclose(got, ref, atol=1e-12)


def test_symmetric_spectra_on_resonance(fig2):
    w = np.linspace(0, 40, 201)
    a = closed_form_spectra(fig2, w)
    b = closed_form_spectra(fig2, -w)
    np.testing.assert_allclose(a.s_c, b.s_c, rtol=1e-13)
    np.testing.assert_allclose(a.s_e, b.s_e, rtol=1e-13)


def test_far_detuned_cavity_share(fig2):
    # peak-height ratio tends to gamma^2/(gamma^2+kappa^2) for large detuning
    target = 0.32**2 / (0.32**2 + 1.6**2)
    assert target == pytest.approx(0.03846, abs=1e-5)
    p = fig2.replace(delta=2000.0)
    s = closed_form_spectra(p, [0.0, 2000.0]).s_c
    assert s[0] / (s[0] + s[1]) == pytest.approx(target, rel=1e-2)


@pytest.mark.parametrize("delta", [0.0, 8.0, 24.0, -40.0])
def test_normalisation(fig2, delta):
    ie, ic = closed_form_norms(fig2.replace(delta=delta))
    assert ie + ic == pytest.approx(1.0, abs=1e-6)


@given(
    st.floats(0.0, 40.0),
    st.floats(0.05, 40.0),
    st.floats(0.05, 40.0),
    st.floats(-80.0, 80.0),
)
def test_spectra_nonnegative_and_normalised(g0, kappa, gamma, delta):
    p = SystemParams(g0, kappa, gamma, 0.0, delta)
    w = np.linspace(-200, 200, 101)
    s = closed_form_spectra(p, w)
    assert np.all(s.s_e >= 0) and np.all(s.s_c >= 0)
    ie, ic = closed_form_norms(p)
    assert ie + ic == pytest.approx(1.0, abs=1e-5)


def test_dephasing_ignored(fig2):
    w = np.linspace(-30, 30, 11)
    a = closed_form_spectra(fig2, w)
    b = closed_form_spectra(fig2.replace(gamma_p=5.0), w)
    np.testing.assert_array_equal(a.s_c, b.s_c)
