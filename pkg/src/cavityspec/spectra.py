"""Emission spectra from two-time correlators.

    S_E(w) = (2 gamma/pi) Re int_0^inf dt int_0^inf dtau exp(i(w - delta)tau) <E(t+tau)E*(t)>
    S_C(w) = (2 kappa/pi) Re int_0^inf dt int_0^inf dtau exp(i w tau)         <C(t+tau)C*(t)>

The emitter kernel carries ``-delta`` because ``E`` is the interaction
picture amplitude whose bare line sits at ``w = delta``.  With these
prefactors the total emission ``int (S_E + S_C) dw`` is 1 for an initially
excited emitter.

Two quadrature routes are provided.  :func:`correlations_to_spectra` takes a
:class:`~cavityspec.stochastic.CorrelationGrid` (trapezoid in t, trapezoid
DFT in tau) and is what the Monte Carlo and grid-regression backends share.
:func:`amplitude_spectra` handles deterministic pure-state amplitudes on a
fine grid: the t-integral becomes an FFT cross-correlation and Romberg
extrapolation over step halvings removes the quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy.integrate import trapezoid
from scipy.linalg import expm
from scipy.signal import czt

from .model import (
    AmplitudeTrajectory,
    CavitySpecError,
    NumericalGrid,
    SystemParams,
    cavity_regression_matrix,
    default_dt,
    default_omega_window,
    emitter_regression_matrix,
    moment_matrix,
    system_eigenvalues,
)
from .stochastic import CorrelationGrid, trapezoid_weights


class TruncationError(CavitySpecError):
    pass


class HorizonCapExceeded(CavitySpecError):
    pass


@dataclass
class Spectrum:
    """Emitter and cavity spectral densities (1/GHz) on ``omega`` (GHz, from w_c)."""

    omega: np.ndarray
    s_e: np.ndarray
    s_c: np.ndarray
    params: Optional[SystemParams] = None
    backend: str = ""
    s_e_err: Optional[np.ndarray] = None
    s_c_err: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def component(self, which: str) -> np.ndarray:
        which = which.upper()
        if which == "E":
            return self.s_e
        if which == "C":
            return self.s_c
        raise ValueError(f"which must be 'E' or 'C', got {which!r}")

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(
            omega=self.omega,
            s_e=self.s_e * factor,
            s_c=self.s_c * factor,
            params=self.params,
            backend=self.backend,
            s_e_err=None if self.s_e_err is None else self.s_e_err * abs(factor),
            s_c_err=None if self.s_c_err is None else self.s_c_err * abs(factor),
            meta=dict(self.meta),
        )

    def mixed(self, emitter_weight: float) -> np.ndarray:
        """Detector-side blend ``a*S_E + (1-a)*S_C``; purely post hoc."""
        return emitter_weight * self.s_e + (1.0 - emitter_weight) * self.s_c


# --------------------------------------------------------------------------
# one-sided Fourier transform of a sampled profile
# --------------------------------------------------------------------------

def _uniform(omega: np.ndarray) -> bool:
    if len(omega) < 3:
        return False
    d = np.diff(omega)
    return bool(np.all(d > 0) and np.allclose(d, d[0], rtol=1e-9, atol=0))


def _dft_direct(x: np.ndarray, h: float, freq: np.ndarray) -> np.ndarray:
    n = np.arange(len(x)) * h
    out = np.empty(len(freq), dtype=complex)
    step = max(1, 2**22 // max(len(x), 1))
    for i in range(0, len(freq), step):
        out[i : i + step] = np.exp(1j * np.outer(freq[i : i + step], n)) @ x
    return out


def _dft_blocked_czt(x: np.ndarray, h: float, freq: np.ndarray) -> np.ndarray:
    """``sum_n x_n exp(1j f_m n h)`` on a uniform ``f`` grid.

    Chirp-z per block keeps the chirp exponents small (their rounding grows
    with the square of the block length); block offsets are applied as
    directly computed phases.
    """
    m = len(freq)
    block = max(m, 4096)
    n_blocks = -(-len(x) // block)
    xb = np.zeros(n_blocks * block, dtype=complex)
    xb[: len(x)] = x
    xb = xb.reshape(n_blocks, block)
    df = freq[1] - freq[0]
    w = np.exp(1j * df * h)
    a = np.exp(-1j * freq[0] * h)
    inner = czt(xb, m=m, w=w, a=a, axis=-1)
    offsets = np.arange(n_blocks) * (block * h)
    phase = np.exp(1j * np.outer(offsets, freq))
    return np.einsum("bm,bm->m", phase, inner)


def halfline_transform(profile, h: float, omega, shift: float = 0.0) -> np.ndarray:
    """Trapezoid value of ``int_0^inf exp(1j (omega - shift) tau) g(tau) dtau``.

    ``profile`` samples ``g`` at ``tau = k h``; it is assumed to have decayed
    at its last sample, which therefore gets full weight.
    """
    g = np.asarray(profile, dtype=complex).copy()
    g[0] *= 0.5
    freq = np.asarray(omega, dtype=float) - shift
    if len(g) * len(freq) <= 2**22 or not _uniform(freq):
        return h * _dft_direct(g, h, freq)
    return h * _dft_blocked_czt(g, h, freq)


# --------------------------------------------------------------------------
# correlation grid -> spectrum
# --------------------------------------------------------------------------

def tau_profiles(corr: CorrelationGrid) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid t-integral of both correlators, as functions of tau."""
    w = _t_weights(corr.t)
    return w @ corr.corr_e, w @ corr.corr_c


def _t_weights(t):
    if len(t) == 1:
        return np.ones(1)
    return trapezoid_weights(len(t), t[1] - t[0])


def _check_truncation(corr: CorrelationGrid, prof_e, prof_c, tol=1e-4):
    residual = corr.corr_e[-1, 0].real + corr.corr_c[-1, 0].real
    slack = 0.0
    if corr.corr_e_err is not None:
        slack = 3.0 * (corr.corr_e_err[-1, 0] + corr.corr_c_err[-1, 0])
    if residual > tol + slack:
        raise TruncationError(
            f"residual excitation {residual:.3g} at t_max={corr.t[-1]:.4g} ns exceeds {tol:g}"
        )
    for name, prof, batch in (
        ("E", prof_e, corr.batch_profile_e),
        ("C", prof_c, corr.batch_profile_c),
    ):
        ref = abs(prof[0])
        if ref == 0:
            continue
        slack = 0.0
        if batch is not None and len(batch) > 1:
            slack = 3.0 * np.std(batch[:, -1]) / math.sqrt(len(batch))
        if abs(prof[-1]) > tol * ref + slack:
            raise TruncationError(
                f"<{name}(t+tau){name}*(t)> at tau_max={corr.tau[-1]:.4g} ns is "
                f"{abs(prof[-1]) / ref:.3g} of its tau=0 value (limit {tol:g})"
            )


def correlations_to_spectra(
    corr: CorrelationGrid,
    params: SystemParams,
    omega,
    check: bool = True,
) -> Spectrum:
    """Spectra from a correlation grid (trapezoid in t and tau).

    When the grid carries per-batch profiles the returned spectrum has
    standard-error bands from the spread of the per-batch spectra.
    """
    omega = np.asarray(omega, dtype=float)
    prof_e, prof_c = tau_profiles(corr)
    if check:
        _check_truncation(corr, prof_e, prof_c)
    h = corr.tau[1] - corr.tau[0]
    pref_e, pref_c = 2 * params.gamma / np.pi, 2 * params.kappa / np.pi
    s_e = pref_e * halfline_transform(prof_e, h, omega, shift=params.delta).real
    s_c = pref_c * halfline_transform(prof_c, h, omega).real
    s_e_err = s_c_err = None
    nb = corr.n_batches
    if nb > 1:
        be = np.array([halfline_transform(p, h, omega, shift=params.delta).real for p in corr.batch_profile_e])
        bc = np.array([halfline_transform(p, h, omega).real for p in corr.batch_profile_c])
        s_e_err = pref_e * be.std(axis=0, ddof=1) / math.sqrt(nb)
        s_c_err = pref_c * bc.std(axis=0, ddof=1) / math.sqrt(nb)
    return Spectrum(
        omega=omega,
        s_e=s_e,
        s_c=s_c,
        params=params,
        backend=corr.backend,
        s_e_err=s_e_err,
        s_c_err=s_c_err,
        meta=dict(corr.meta),
    )


# --------------------------------------------------------------------------
# fine-grid deterministic route
# --------------------------------------------------------------------------

def _autocorrelation_profile(x: np.ndarray, h: float) -> np.ndarray:
    """``h * sum'_j x[j+k] conj(x[j])`` for every lag ``k`` (trapezoid in t)."""
    n = len(x)
    wx = x * h
    wx[0] *= 0.5
    size = sfft.next_fast_len(2 * n)
    fx = sfft.fft(x, size)
    fw = sfft.fft(wx, size)
    return sfft.ifft(fx * np.conj(fw))[:n]


def _romberg(values: list) -> np.ndarray:
    """Richardson-combine estimates at steps h, 2h, 4h, ... (error in even powers)."""
    table = list(values)
    for level in range(1, len(table)):
        factor = 4.0**level
        table = [(factor * table[i] - table[i + 1]) / (factor - 1) for i in range(len(table) - 1)]
    return table[0]


def amplitude_spectra(
    traj: AmplitudeTrajectory,
    params: SystemParams,
    omega,
    levels: int = 3,
) -> Spectrum:
    """Spectra of a single deterministic pure-state trajectory.

    ``traj`` must be sampled uniformly from t = 0 until both amplitudes have
    decayed to negligible size.  The correlators ``E(t+tau)E*(t)`` are never
    materialised: their t-integral is an autocorrelation computed by FFT.
    Estimates at ``levels`` successive step doublings are Romberg combined.
    """
    omega = np.asarray(omega, dtype=float)
    t = traj.t
    h = float(t[1] - t[0])
    est_e, est_c = [], []
    for level in range(levels):
        stride = 2**level
        hs = h * stride
        pe = _autocorrelation_profile(traj.e[::stride].copy(), hs)
        pc = _autocorrelation_profile(traj.c[::stride].copy(), hs)
        est_e.append(halfline_transform(pe, hs, omega, shift=params.delta))
        est_c.append(halfline_transform(pc, hs, omega))
    s_e = 2 * params.gamma / np.pi * _romberg(est_e).real
    s_c = 2 * params.kappa / np.pi * _romberg(est_c).real
    return Spectrum(
        omega=omega,
        s_e=s_e,
        s_c=s_c,
        params=params,
        backend="amplitude_grid",
        meta={"dt": h, "t_max": float(t[-1]), "romberg_levels": levels},
    )


def resolved_step(params: SystemParams, omega, phase_per_step: float = 0.05) -> float:
    """Step such that the fastest phase of ``exp(i w tau) g(tau)`` is resolved."""
    lam = system_eigenvalues(params)
    fastest = float(np.max(np.abs(omega))) + float(np.max(np.abs(lam))) + abs(params.delta)
    return phase_per_step / fastest


def amplitude_horizon(params: SystemParams, floor: float = 1e-10) -> float:
    """Time after which both amplitudes stay below ``floor``."""
    rate = -float(np.max(system_eigenvalues(params).real))
    if rate <= 0:
        raise HorizonCapExceeded("amplitude system has a non-decaying mode")
    return math.log(1.0 / floor) / rate * 1.2


# --------------------------------------------------------------------------
# horizons, grids, norms
# --------------------------------------------------------------------------

def _slowest_rate(mat: np.ndarray) -> float:
    return -float(np.max(np.linalg.eigvals(mat).real))


def adaptive_horizon(
    params: SystemParams,
    tol: float = 1e-6,
    max_steps: int = 100_000,
    dt: Optional[float] = None,
) -> tuple[float, float]:
    """``(t_max, tau_max)`` where remaining excitation / correlation < ``tol``.

    Starts from the slowest eigenvalue of the noise-averaged moment system
    (and of the regression systems for tau), then extends in 2% increments
    until the exact residual is below ``tol`` at the horizon and beyond.
    """
    dt = default_dt(params) if dt is None else dt
    b = moment_matrix(params)
    rate = _slowest_rate(b)
    if not rate > 0:
        raise HorizonCapExceeded("moment system has a non-decaying mode (dark state)")
    y0 = np.array([1.0, 0.0, 0.0, 0.0])

    def residual(t):
        y = expm(b * t) @ y0
        return y[0] + y[1]

    t_max = math.log(1.0 / tol) / rate
    t_max = _extend(t_max, lambda t: residual(t) < tol, dt, max_steps, "t_max")

    n_e, n_c, s_r, s_i = -np.linalg.solve(b, y0)
    s = complex(s_r, s_i)
    tau_max = 0.0
    for mat, init in (
        (emitter_regression_matrix(params), np.array([n_e, s])),
        (cavity_regression_matrix(params), np.array([n_c, np.conj(s)])),
    ):
        if abs(init[0]) == 0:
            continue
        r = _slowest_rate(mat)
        if not r > 0:
            raise HorizonCapExceeded("regression system has a non-decaying mode")
        start = math.log(1.0 / tol) / r

        def small(tau, mat=mat, init=init):
            return abs((expm(mat * tau) @ init)[0]) < tol * abs(init[0])

        tau_max = max(tau_max, _extend(start, small, dt, max_steps, "tau_max"))
    return t_max, tau_max


def _extend(start, ok, dt, max_steps, label):
    t = start
    for _ in range(400):
        if t / dt > max_steps:
            raise HorizonCapExceeded(
                f"{label}={t:.4g} ns needs more than {max_steps} steps of {dt:.3g} ns"
            )
        if all(ok(t * f) for f in (1.0, 1.02, 1.05, 1.1)):
            return t
        t *= 1.02
    raise HorizonCapExceeded(f"{label} did not converge")


def default_grid(
    params: SystemParams,
    dt: Optional[float] = None,
    n_omega: int = 2048,
    max_outer: int = 256,
    omega_window: Optional[tuple[float, float]] = None,
    tol: float = 1e-6,
) -> NumericalGrid:
    """Grid for the Monte Carlo / grid-regression pipeline.

    The delay lattice is as coarse as the omega window allows without the
    trapezoid DFT aliasing onto itself (period at least twice the window).
    """
    t_max, tau_max = adaptive_horizon(params, tol=tol)
    dt = default_dt(params) if dt is None else dt
    lo, hi = omega_window if omega_window is not None else default_omega_window(params)
    span = hi - lo
    tau_stride = max(1, int(math.floor(math.pi / span / dt)))
    n_tau = tau_stride * math.ceil(tau_max / dt / tau_stride)
    coarse_t = math.ceil(t_max / dt / tau_stride)
    r = max(1, math.ceil(coarse_t / max_outer))
    t_stride = r * tau_stride
    n_t = t_stride * math.ceil(t_max / dt / t_stride)
    return NumericalGrid(
        t_max=n_t * dt,
        dt=dt,
        n_t=n_t,
        omega_min=lo,
        omega_max=hi,
        n_omega=n_omega,
        tau_max=n_tau * dt,
        n_tau=n_tau,
        t_stride=t_stride,
        tau_stride=tau_stride,
    )


def _tail_mass(omega, s, centre, end):
    """Mass beyond one end of the grid, assuming a power-law tail."""
    idx = -1 if end == "hi" else 0
    x1 = abs(omega[idx] - centre)
    y1 = s[idx]
    if not (y1 > 0 and x1 > 0):
        return 0.0
    j = int(round(0.9 * (len(omega) - 1)))
    j = j if end == "hi" else len(omega) - 1 - j
    x0, y0 = abs(omega[j] - centre), s[j]
    p = 2.0
    if y0 > y1 > 0 and x1 > x0 > 0:
        p = float(np.clip(math.log(y0 / y1) / math.log(x1 / x0), 2.0, 8.0))
    return y1 * x1 / (p - 1.0)


def integrate_density(omega, s, tail_correction: bool = True) -> float:
    """Trapezoid integral of a spectral density plus extrapolated tails.

    The tails assume ``s ~ |w - c|**-p`` with ``c`` the spectral centroid and
    ``p`` (clipped to [2, 8]) read off the last 10% of the window.
    """
    omega = np.asarray(omega, dtype=float)
    s = np.asarray(s, dtype=float)
    total = float(trapezoid(s, omega))
    if tail_correction and total > 0:
        centre = float(trapezoid(s * omega, omega) / total)
        total += _tail_mass(omega, s, centre, "lo") + _tail_mass(omega, s, centre, "hi")
    return total


def spectrum_norms(spec: Spectrum, tail_correction: bool = True) -> tuple[float, float, float]:
    """``(I_E, I_C, I_C / (I_E + I_C))``."""
    i_e = integrate_density(spec.omega, spec.s_e, tail_correction)
    i_c = integrate_density(spec.omega, spec.s_c, tail_correction)
    total = i_e + i_c
    return i_e, i_c, (i_c / total if total > 0 else float("nan"))
