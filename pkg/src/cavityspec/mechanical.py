"""Classical piston-mass analogue of intensity shifting.

A unit mass on a spring ``k_c`` to the wall and ``g_c`` to a piston at
``f(t)``, damped at ``kappa_c``:

    x'' + kappa_c x' + (k_c + g_c) x = g_c f(t)

The piston oscillates at ``drive_freq``; a "dephasing event" resets its
phase to a fresh uniform value at Poisson times.  Every reset excites a
transient at the mass eigenfrequency ``sqrt(k_c + g_c)``, so the spectral
weight there grows with the event rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .model import CavitySpecError

# minimum expected number of phase events in a spectral-weight window
MIN_EVENTS = 50


class BandsOverlap(CavitySpecError, ValueError):
    pass


class TooFewEvents(CavitySpecError, ValueError):
    pass


@dataclass(frozen=True)
class MechParams:
    """Spring constants in (rad/ns)**2, rates in 1/ns, frequency in rad/ns."""

    k_c: float
    g_c: float
    kappa_c: float
    drive_freq: float
    jump_rate: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        for name in ("k_c", "g_c", "kappa_c", "jump_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if not (math.isfinite(self.drive_freq) and math.isfinite(self.amplitude)):
            raise ValueError("drive_freq and amplitude must be finite")

    @property
    def eigenfrequency(self) -> float:
        return math.sqrt(self.k_c + self.g_c)

    def replace(self, **changes) -> "MechParams":
        fields = dict(self.__dict__)
        fields.update(changes)
        return MechParams(**fields)


def piston_events(mech: MechParams, t_start: float, t_end: float, seed: int):
    """Poisson event times in ``(t_start, t_end]`` and their new phases."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = rng.poisson(mech.jump_rate * (t_end - t_start)) if mech.jump_rate > 0 else 0
    times = np.sort(rng.uniform(t_start, t_end, n))
    phases = rng.uniform(0.0, 2.0 * math.pi, n)
    return times, phases


def piston_signal(mech: MechParams, t_grid, seed: int) -> np.ndarray:
    """``amplitude * cos(drive_freq t + theta(t))`` with ``theta(t_0) = 0``."""
    t = np.asarray(t_grid, dtype=float)
    times, phases = piston_events(mech, float(t[0]), float(t[-1]), seed)
    theta = np.concatenate([[0.0], phases])[np.searchsorted(times, t, side="right")]
    return mech.amplitude * np.cos(mech.drive_freq * t + theta)


def simulate_mass(mech: MechParams, f, t_grid, x0: float = 0.0, v0: float = 0.0) -> np.ndarray:
    """Mass position on ``t_grid`` for piston path ``f``.

    Uses the exact discretisation of the linear ODE with the forcing held
    piecewise linear between samples (``scipy.signal.lsim``), which is
    second-order accurate in the forcing and exact for the free motion.
    """
    t = np.asarray(t_grid, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != t.shape:
        raise ValueError("f and t_grid must have the same length")
    w2 = mech.k_c + mech.g_c
    a = np.array([[0.0, 1.0], [-w2, -mech.kappa_c]])
    b = np.array([[0.0], [mech.g_c]])
    c = np.array([[1.0, 0.0]])
    d = np.array([[0.0]])
    _, x, _ = signal.lsim((a, b, c, d), f, t - t[0], X0=[x0, v0], interp=True)
    return np.atleast_1d(x)


def mass_energy(mech: MechParams, x, t_grid) -> np.ndarray:
    """Kinetic plus wall/coupling spring energy with the piston at rest."""
    x = np.asarray(x, dtype=float)
    v = np.gradient(x, np.asarray(t_grid, dtype=float))
    return 0.5 * v**2 + 0.5 * (mech.k_c + mech.g_c) * x**2


def power_spectrum(x, t_grid) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed one-sided power ``|X(w)|**2`` on angular frequencies."""
    t = np.asarray(t_grid, dtype=float)
    x = np.asarray(x, dtype=float)
    dt = float(t[1] - t[0])
    win = signal.windows.hann(len(x), sym=False)
    spec = np.fft.rfft(x * win) * dt
    omega = 2.0 * math.pi * np.fft.rfftfreq(len(x), dt)
    return omega, np.abs(spec) ** 2


def spectral_weights(x, mech: MechParams, t_grid) -> tuple[float, float]:
    """Power within ``kappa_c`` of the drive and of the eigenfrequency."""
    t = np.asarray(t_grid, dtype=float)
    sep = abs(mech.drive_freq - mech.eigenfrequency)
    if sep < 2.0 * mech.kappa_c:
        raise BandsOverlap(f"drive and eigenfrequency {sep:.4g} apart, need >= 2*kappa_c")
    span = float(t[-1] - t[0])
    if mech.jump_rate > 0 and mech.jump_rate * span < MIN_EVENTS:
        raise TooFewEvents(
            f"window of {span:.4g} ns holds {mech.jump_rate * span:.3g} expected events, "
            f"need {MIN_EVENTS}"
        )
    omega, power = power_spectrum(x, t)
    dw = omega[1] - omega[0]

    def band(centre):
        sel = np.abs(omega - abs(centre)) <= mech.kappa_c
        if not sel.any():
            raise ValueError("frequency resolution too coarse for the band width")
        return float(power[sel].sum() * dw)

    return band(mech.drive_freq), band(mech.eigenfrequency)


def weight_ratio(mech: MechParams, t_grid, seed: int, discard: float = 0.0) -> float:
    """``weight_at_eigen / weight_at_drive`` after dropping the first ``discard`` ns."""
    t = np.asarray(t_grid, dtype=float)
    x = simulate_mass(mech, piston_signal(mech, t, seed), t)
    keep = t >= t[0] + discard
    w_drive, w_eigen = spectral_weights(x[keep], mech, t[keep])
    return w_eigen / w_drive
