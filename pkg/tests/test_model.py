from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavityspec.model import (
    NegativeRate,
    NoDecayChannel,
    NumericalGrid,
    Regime,
    SystemParams,
    classify_regime,
    default_dt,
    rabi_splitting,
    system_eigenvalues,
    system_matrix,
    validate_params,
)

rate = st.floats(0.0, 60.0, allow_nan=False)
pos_rate = st.floats(0.05, 60.0, allow_nan=False)
detuning = st.floats(-120.0, 120.0, allow_nan=False)


def test_validate_fig2_params():
    p = validate_params(8, 1.6, 0.32, 0, 0)
    assert (p.g0, p.kappa, p.gamma, p.gamma_p, p.delta) == (8.0, 1.6, 0.32, 0.0, 0.0)


def test_negative_rate_rejected():
    with pytest.raises(NegativeRate):
        validate_params(8, -1.6, 0.32, 0, 0)


@pytest.mark.parametrize("field", ["g0", "kappa", "gamma", "gamma_p"])
def test_every_rate_is_checked(field):
    kw = dict(g0=1.0, kappa=1.0, gamma=1.0, gamma_p=1.0, delta=0.0)
    kw[field] = -0.1
    with pytest.raises(NegativeRate):
        SystemParams(**kw)


def test_decoupled_system_is_legal():
    p = validate_params(0, 1.6, 0.32, 5, 0)
    assert p.g0 == 0


def test_no_decay_channel():
    with pytest.raises(NoDecayChannel):
        validate_params(8, 0, 0, 1, 0)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        validate_params(float("nan"), 1, 1)


def test_negative_detuning_allowed():
    assert validate_params(8, 1.6, 0.32, 0, -40).delta == -40


def test_system_matrix_decoupled():
    m = system_matrix(SystemParams(0, 1.6, 0.32, 0, 3.0))
    np.testing.assert_allclose(m, np.diag([-0.32 - 3j, -1.6]))


def test_symmetric_eigenvalues_and_vectors():
    p = SystemParams(5.0, 2.0, 2.0)
    lam = system_eigenvalues(p)
    np.testing.assert_allclose(lam, [-2 - 5j, -2 + 5j], atol=1e-12)
    m = system_matrix(p)
    for val, vec in ((-2 + 5j, [1, -1]), (-2 - 5j, [1, 1])):
        v = np.array(vec, dtype=complex)
        np.testing.assert_allclose(m @ v, val * v, atol=1e-12)


def test_fig2_eigenvalues(fig2):
    lam = system_eigenvalues(fig2)
    oracle = np.linalg.eigvals(system_matrix(fig2))
    np.testing.assert_allclose(sorted(lam, key=lambda z: z.imag), sorted(oracle, key=lambda z: z.imag), atol=1e-12)
    np.testing.assert_allclose(lam.real, [-0.96, -0.96], atol=1e-12)
    np.testing.assert_allclose(lam.imag, [-7.9743, 7.9743], atol=1e-4)


@pytest.mark.parametrize(
    "g0, kappa, gamma, expected",
    [(8, 1.6, 0.32, Regime.STRONG), (0, 1.6, 0.32, Regime.WEAK), (38, 43, 0.1, Regime.STRONG)],
)
def test_classify_regime(g0, kappa, gamma, expected):
    assert classify_regime(SystemParams(g0, kappa, gamma)) is expected


def test_rabi_splitting(fig2):
    assert rabi_splitting(fig2) == pytest.approx(2 * math.sqrt(64 - 0.64**2))
    assert rabi_splitting(SystemParams(0.1, 5, 0.1)) == 0.0


@given(rate, pos_rate, rate, detuning)
def test_trace_bookkeeping(g0, kappa, gamma, delta):
    p = SystemParams(g0, kappa, gamma, 0, delta)
    assert np.trace(system_matrix(p)) == pytest.approx(-(gamma + kappa) - 1j * delta)


@given(rate, pos_rate, rate, detuning)
def test_eigenvalues_decay(g0, kappa, gamma, delta):
    lam = system_eigenvalues(SystemParams(g0, kappa, gamma, 0, delta))
    assert np.all(lam.real <= 1e-9 * (1 + g0 + kappa + gamma + abs(delta)))


@given(rate, pos_rate, pos_rate)
def test_regime_symmetric_in_kappa_gamma(g0, a, b):
    assert classify_regime(SystemParams(g0, a, b)) is classify_regime(SystemParams(g0, b, a))


def test_default_dt(fig2):
    assert default_dt(fig2) == pytest.approx(0.1 / 8)
    assert default_dt(fig2.replace(delta=40, gamma_p=5)) == pytest.approx(0.1 / 45)


def test_grid_invariants(fig2):
    g = NumericalGrid(t_max=1.0, dt=0.01, n_t=100, omega_min=-60, omega_max=60, n_omega=11, tau_max=0.5, n_tau=50)
    assert g.covers(fig2)
    assert not g.covers(fig2.replace(delta=40))
    with pytest.raises(ValueError):
        NumericalGrid(t_max=2.0, dt=0.01, n_t=100, omega_min=-1, omega_max=1, n_omega=11, tau_max=0.5, n_tau=50)
    with pytest.raises(ValueError):
        NumericalGrid(t_max=1.0, dt=0.01, n_t=100, omega_min=1, omega_max=-1, n_omega=11, tau_max=0.5, n_tau=50)
