"""Noise-averaged moment and regression equations.

Averaging the stochastic amplitude equations over Gaussian white phase
noise closes on three single-time moments,

    n_E = <|E|^2>,   n_C = <|C|^2>,   s = <C E*> exp(+i(delta t + phi))

    dn_E/dt = -2 gamma n_E + 2 g0 Im(s)
    dn_C/dt = -2 kappa n_C - 2 g0 Im(s)
    ds/dt   = -(gamma + kappa + gamma_p - i delta) s - i g0 (n_E - n_C)

and the two-time correlators obey linear equations in the delay tau with
the equal-time moments as initial data:

    emitter (W = <E(t+tau)E*(t)>, V):  W' = -gamma W - i g0 V
                                       V' = -(kappa + gamma_p - i delta) V - i g0 W
    cavity  (Y = <C(t+tau)C*(t)>, Z):  Y' = -kappa Y - i g0 Z
                                       Z' = -(gamma + gamma_p + i delta) Z - i g0 Y

All systems have constant coefficients, so every solve here is an exact
matrix exponential; there is no time-discretisation error.  Because the
spectra are linear in the initial data, integrating over t before the
tau-transform gives closed expressions (:func:`regression_spectra`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .model import (
    NumericalGrid,
    SystemParams,
    cavity_regression_matrix,
    emitter_regression_matrix,
    moment_matrix,
)
from .spectra import Spectrum
from .stochastic import CorrelationGrid


@dataclass(frozen=True)
class MomentState:
    n_e: float
    n_c: float
    s: complex
    t: float


@dataclass(frozen=True)
class MomentTrajectory:
    t: np.ndarray
    n_e: np.ndarray
    n_c: np.ndarray
    s: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> MomentState:
        return MomentState(float(self.n_e[i]), float(self.n_c[i]), complex(self.s[i]), float(self.t[i]))


_INITIAL = np.array([1.0, 0.0, 0.0, 0.0])


def _uniform_step(t: np.ndarray) -> float | None:
    if len(t) < 2:
        return None
    h = t[1] - t[0]
    return float(h) if np.allclose(np.diff(t), h, rtol=1e-10, atol=0) else None


def _propagate_linear(mat: np.ndarray, y0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``expm(mat * t_i) @ y0`` for every ``t_i``, shape (len(t), dim)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((len(t), len(y0)), dtype=np.result_type(mat, y0))
    h = _uniform_step(t)
    if h is not None:
        step = expm(mat * h)
        y = expm(mat * t[0]) @ y0
        for i in range(len(t)):
            out[i] = y
            y = step @ y
    else:
        for i, ti in enumerate(t):
            out[i] = expm(mat * ti) @ y0
    return out


def evolve_moments(params: SystemParams, t_grid) -> MomentTrajectory:
    """Noise-averaged populations and coherence from ``(1, 0, 0)`` at t = 0."""
    t = np.asarray(t_grid, dtype=float)
    y = _propagate_linear(moment_matrix(params), _INITIAL, t)
    return MomentTrajectory(t=t, n_e=y[:, 0], n_c=y[:, 1], s=y[:, 2] + 1j * y[:, 3])


def integrated_moments(params: SystemParams) -> tuple[float, float, complex]:
    """``(int n_E dt, int n_C dt, int s dt)`` over ``[0, inf)``."""
    y = -np.linalg.solve(moment_matrix(params), _INITIAL)
    return float(y[0]), float(y[1]), complex(y[2], y[3])


def _regression(mat, first, second, tau_grid):
    tau = np.asarray(tau_grid, dtype=float)
    y = _propagate_linear(mat, np.array([first, second], dtype=complex), tau)
    return y[:, 0], y[:, 1]


def evolve_regression_emitter(params: SystemParams, init: MomentState, tau_grid):
    """``(W_E, V)`` over tau; ``W_E(tau) = <E(t+tau) E*(t)>``."""
    return _regression(emitter_regression_matrix(params), init.n_e, init.s, tau_grid)


def evolve_regression_cavity(params: SystemParams, init: MomentState, tau_grid):
    """``(Y_C, Z)`` over tau; ``Y_C(tau) = <C(t+tau) C*(t)>``."""
    return _regression(cavity_regression_matrix(params), init.n_c, np.conj(init.s), tau_grid)


def _tau_propagators(mat: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Stack of ``expm(mat * tau_k)``, shape (n_tau, 2, 2)."""
    h = _uniform_step(tau)
    out = np.empty((len(tau), 2, 2), dtype=complex)
    if h is None:
        for k, tk in enumerate(tau):
            out[k] = expm(mat * tk)
        return out
    step = expm(mat * h)
    cur = expm(mat * tau[0])
    for k in range(len(tau)):
        out[k] = cur
        cur = step @ cur
    return out


def regression_correlations(params: SystemParams, grid: NumericalGrid) -> CorrelationGrid:
    """Correlators on the same outer-t / tau lattice the Monte Carlo uses."""
    t, tau = grid.t_outer, grid.tau
    mom = evolve_moments(params, t)
    pe = _tau_propagators(emitter_regression_matrix(params), tau)
    pc = _tau_propagators(cavity_regression_matrix(params), tau)
    corr_e = pe[None, :, 0, 0] * mom.n_e[:, None] + pe[None, :, 0, 1] * mom.s[:, None]
    corr_c = pc[None, :, 0, 0] * mom.n_c[:, None] + pc[None, :, 0, 1] * np.conj(mom.s)[:, None]
    return CorrelationGrid(t=t, tau=tau, corr_e=corr_e, corr_c=corr_c, backend="regression")


def _resolvent_first_row(mat: np.ndarray, freq: np.ndarray, init: np.ndarray) -> np.ndarray:
    """``e1 . (-(mat + 1j*f))^-1 . init`` for every ``f`` in ``freq``."""
    a, b, c, d = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    a = a + 1j * freq
    d = d + 1j * freq
    det = a * d - b * c
    # first row of -(inverse) is -(d, -b)/det
    return -(d * init[0] - b * init[1]) / det


def regression_spectra(params: SystemParams, omega):
    """Exact spectra of the regression backend (no grid error).

    Equals the double integral over ``t, tau in [0, inf)`` computed in closed
    form: the t-integral of the moments is ``-B^-1 y0`` and the one-sided
    tau-transform of a linear system is its resolvent.
    """
    w = np.asarray(omega, dtype=float)
    n_e, n_c, s = integrated_moments(params)
    ge = _resolvent_first_row(
        emitter_regression_matrix(params), w - params.delta, np.array([n_e, s])
    )
    gc = _resolvent_first_row(cavity_regression_matrix(params), w, np.array([n_c, np.conj(s)]))
    s_e = (2 * params.gamma / np.pi) * ge.real
    s_c = (2 * params.kappa / np.pi) * gc.real
    return Spectrum(omega=w, s_e=s_e, s_c=s_c, params=params, backend="regression")
