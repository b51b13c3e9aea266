"""Exact dephasing-free amplitudes and rational-function spectra.

With ``gamma_p = 0`` the amplitude equations are linear with constant
coefficients in the detuning frame, so ``(E, C)`` follow from a 2x2 matrix
exponential.  The emission spectra reduce to

    S_C(w) = (kappa/pi) * g0**2 / |D(w)|**2
    S_E(w) = (gamma/pi) * |kappa - 1j*w|**2 / |D(w)|**2
    D(w)   = (gamma + 1j*delta - 1j*w) * (kappa - 1j*w) + g0**2

which is the highest precision reference in the package.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .model import AmplitudeTrajectory, SystemParams, system_matrix
from .spectra import Spectrum


def _sinhc(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z * z / 6.0, np.sinh(safe) / safe)


def propagator_columns(params: SystemParams, t) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Entries of ``expm(system_matrix * t)`` evaluated elementwise over ``t``.

    Uses ``exp(mu t) [cosh(q t) I + sinh(q t)/q (M - mu I)]``.  The sinh/q
    factor is evaluated through ``t * sinhc(q t)`` for small ``|q t|``, which
    degrades gracefully into the secular ``1 + (M - mu) t`` form at the
    exceptional point where the two eigenvalues coincide.
    """
    t = np.asarray(t, dtype=float)
    m = system_matrix(params)
    mu = 0.5 * (m[0, 0] + m[1, 1])
    q = np.sqrt((0.5 * (m[0, 0] - m[1, 1])) ** 2 + m[0, 1] * m[1, 0] + 0j)
    e_plus = np.exp((mu + q) * t)
    e_minus = np.exp((mu - q) * t)
    cosh_part = 0.5 * (e_plus + e_minus)
    qt = q * t
    near = np.abs(qt) < 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        far_val = (e_plus - e_minus) / (2.0 * q) if q != 0 else np.zeros_like(e_plus)
    sinh_part = np.where(near, np.exp(mu * t) * t * _sinhc(np.where(near, qt, 0.0)), far_val)
    a = m[0, 0] - mu
    p00 = cosh_part + a * sinh_part
    p11 = cosh_part - a * sinh_part
    p01 = m[0, 1] * sinh_part
    p10 = m[1, 0] * sinh_part
    return p00, p01, p10, p11


def solve_amplitudes(params: SystemParams, t) -> AmplitudeTrajectory:
    """Exact ``E(t), C(t)`` for ``E(0) = 1, C(0) = 0``; ``gamma_p`` is ignored."""
    t = np.asarray(t, dtype=float)
    p00, _, p10, _ = propagator_columns(params, t)
    e = p00 * np.exp(1j * params.delta * t)
    return AmplitudeTrajectory(t=t, e=e, c=np.asarray(p10, dtype=complex))


def denominator(params: SystemParams, omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    return (params.gamma + 1j * (params.delta - w)) * (params.kappa - 1j * w) + params.g0**2


def closed_form_spectra(params: SystemParams, omega) -> Spectrum:
    """Rational-function emitter and cavity spectra (``gamma_p`` ignored)."""
    w = np.asarray(omega, dtype=float)
    d2 = np.abs(denominator(params, w)) ** 2
    s_c = (params.kappa / np.pi) * params.g0**2 / d2
    s_e = (params.gamma / np.pi) * (params.kappa**2 + w**2) / d2
    return Spectrum(omega=w, s_e=s_e, s_c=s_c, params=params, backend="closed_form")


def closed_form_norms(params: SystemParams, tol: float = 1e-10) -> tuple[float, float]:
    """``(int S_E, int S_C)`` over the whole real line by adaptive quadrature."""
    centres = sorted({0.0, params.delta})
    width = params.linewidth_scale
    lo, hi = centres[0] - 10 * width, centres[-1] + 10 * width
    points = np.unique(np.concatenate([centres, np.linspace(lo, hi, 41)]))

    def parts(which):
        f = lambda w: getattr(closed_form_spectra(params, np.array([w])), which)[0]  # noqa: E731
        total = 0.0
        for a, b in zip(points[:-1], points[1:]):
            total += integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=200)[0]
        total += integrate.quad(f, -np.inf, lo, epsabs=tol, epsrel=tol, limit=200)[0]
        total += integrate.quad(f, hi, np.inf, epsabs=tol, epsrel=tol, limit=200)[0]
        return total

    return parts("s_e"), parts("s_c")
