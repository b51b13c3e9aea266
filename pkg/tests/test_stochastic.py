from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2

from cavityspec.closed_form import solve_amplitudes
from cavityspec.model import NumericalGrid, SystemParams
from cavityspec.regression import evolve_moments
from cavityspec.stochastic import (
    EnsembleConfig,
    StepTooLarge,
    ensemble_correlations,
    generate_noise,
    integrate_trajectory,
    trajectory_seed,
)


def _grid(dt, n_t, n_tau, t_stride=1):
    return NumericalGrid(
        t_max=n_t * dt, dt=dt, n_t=n_t, omega_min=-1, omega_max=1, n_omega=2,
        tau_max=n_tau * dt, n_tau=n_tau, t_stride=t_stride,
    )


def test_zero_dephasing_noise_is_flat():
    path = generate_noise(0.0, 0.01, 100, seed=3)
    np.testing.assert_array_equal(path.phi, 0.0)
    assert len(path.phi) == 101


def test_increment_variance():
    n = 100_000
    path = generate_noise(5.0, 0.01, n, seed=42)
    inc = path.increments
    assert path.phi[0] == 0
    # (n-1) s^2 / sigma^2 follows chi^2 with n-1 degrees of freedom
    stat = (n - 1) * inc.var(ddof=1) / 0.1
    mean, sd = n - 1, np.sqrt(2 * (n - 1))
    assert abs(stat - mean) < 3 * sd
    assert chi2.ppf(0.0005, n - 1) < stat < chi2.ppf(0.9995, n - 1)


def test_noise_deterministic():
    a = generate_noise(5.0, 0.01, 500, seed=9)
    b = generate_noise(5.0, 0.01, 500, seed=9)
    c = generate_noise(5.0, 0.01, 500, seed=10)
    assert a.phi.tobytes() == b.phi.tobytes()
    assert a.phi.tobytes() != c.phi.tobytes()


def test_noise_rejects_bad_input():
    with pytest.raises(ValueError):
        generate_noise(-1.0, 0.01, 10, 0)
    with pytest.raises(ValueError):
        generate_noise(1.0, 0.0, 10, 0)


def test_trajectory_seeds_distinct():
    seeds = {trajectory_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert trajectory_seed(1, 5) == trajectory_seed(1, 5)
    assert trajectory_seed(1, 5) != trajectory_seed(2, 5)


def test_noiseless_trajectory_matches_closed_form(fig2):
    dt = 1e-3
    t = np.arange(0, 3001) * dt
    noise = generate_noise(0.0, dt / 2, 2 * 3000, seed=0)
    tr = integrate_trajectory(fig2, noise, t)
    ref = solve_amplitudes(fig2, t)
    err = max(np.max(np.abs(tr.e - ref.e)), np.max(np.abs(tr.c - ref.c)))
    assert err < 1e-4


def test_decoupled_decay_exact():
    p = SystemParams(0.0, 1.6, 0.32, 5.0, 3.0)
    dt = 0.01
    t = np.arange(0, 501) * dt
    tr = integrate_trajectory(p, generate_noise(5.0, dt / 2, 1000, seed=1), t)
    np.testing.assert_allclose(np.abs(tr.e), np.exp(-0.32 * t), rtol=1e-12)
    np.testing.assert_array_equal(tr.c, 0)


@given(
    st.floats(0.0, 20.0),
    st.floats(0.05, 20.0),
    st.floats(0.05, 20.0),
    st.floats(0.0, 20.0),
    st.floats(-20.0, 20.0),
    st.integers(0, 2**32),
)
def test_dissipative(g0, kappa, gamma, gamma_p, delta, seed):
    p = SystemParams(g0, kappa, gamma, gamma_p, delta)
    dt = 0.002
    t = np.arange(0, 201) * dt
    tr = integrate_trajectory(p, generate_noise(gamma_p, dt / 2, 400, seed), t)
    pop = tr.population
    assert np.all(np.diff(pop) <= 1e-12)
    assert pop[-1] <= pop[0]


def test_step_guard(fig2):
    t = np.arange(0, 11) * 0.02
    with pytest.raises(StepTooLarge):
        integrate_trajectory(fig2, generate_noise(0.0, 0.01, 20, 0), t)


def test_noise_must_match_half_step(fig2):
    t = np.arange(0, 11) * 0.001
    with pytest.raises(ValueError):
        integrate_trajectory(fig2, generate_noise(0.0, 0.001, 20, 0), t)


def test_noiseless_ensemble_is_exact(fig2):
    p = fig2.replace(delta=6.0)
    dt = 0.005
    grid = _grid(dt, 40, 60, t_stride=4)
    corr = ensemble_correlations(p, EnsembleConfig(6, 1, 3), grid)
    amp = solve_amplitudes(p, np.arange(101) * dt)
    i = np.arange(0, 41, 4)
    k = np.arange(61)
    ref_e = amp.e[i[:, None] + k[None, :]] * np.conj(amp.e[i])[:, None]
    ref_c = amp.c[i[:, None] + k[None, :]] * np.conj(amp.c[i])[:, None]
    # exponential integrator with exact per-step propagator
    np.testing.assert_allclose(corr.corr_e, ref_e, atol=1e-12)
    np.testing.assert_allclose(corr.corr_c, ref_c, atol=1e-12)
    np.testing.assert_allclose(corr.corr_e_err, 0, atol=1e-14)


def test_equal_time_column_vs_moments(fig2):
    p = fig2.replace(gamma_p=5.0, delta=8.0)
    grid = _grid(0.002, 400, 1, t_stride=50)
    corr = ensemble_correlations(p, EnsembleConfig(10_000, 5, 50), grid)
    mom = evolve_moments(p, grid.t_outer)
    for got, want, err in ((corr.corr_e, mom.n_e, corr.corr_e_err), (corr.corr_c, mom.n_c, corr.corr_c_err)):
        dev = np.abs(got[1:, 0] - want[1:]) / err[1:, 0]
        assert np.all(dev < 3), dev


def test_error_scaling(fig2):
    p = fig2.replace(gamma_p=5.0)
    grid = _grid(0.003, 200, 100, t_stride=50)
    small = ensemble_correlations(p, EnsembleConfig(2000, 3, 50), grid)
    large = ensemble_correlations(p, EnsembleConfig(8000, 4, 50), grid)
    ratio = np.mean(large.corr_e_err[1:]) / np.mean(small.corr_e_err[1:])
    assert ratio == pytest.approx(0.5, rel=0.3)


def test_thread_count_does_not_change_result(fig2):
    p = fig2.replace(gamma_p=5.0, delta=16.0)
    grid = _grid(0.003, 100, 100, t_stride=10)
    cfg = EnsembleConfig(1200, 99, 12)
    a = ensemble_correlations(p, cfg, grid, workers=1)
    b = ensemble_correlations(p, cfg, grid, workers=4)
    assert a.corr_e.tobytes() == b.corr_e.tobytes()
    assert a.corr_c_err.tobytes() == b.corr_c_err.tobytes()
    assert a.batch_profile_e.tobytes() == b.batch_profile_e.tobytes()


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(n_traj=100, batch_count=7)
    with pytest.raises(ValueError):
        EnsembleConfig(n_traj=0)
    assert EnsembleConfig(100, 0, 4).batch_size == 25
