"""Physical parameters, unit conventions and regime classification.

Units
-----
Every rate and frequency is an *angular* frequency in GHz (i.e. 1/ns) and
every time is in ns, so products such as ``delta * t`` are phases in radians
with no factor of 2*pi anywhere.  ``kappa`` and ``gamma`` are amplitude decay
rates: intensities decay at ``2*kappa`` and ``2*gamma``.

Frames
------
Spectral frequencies ``omega`` are measured from the cavity resonance.  The
bare emitter line therefore sits at ``omega = delta`` where
``delta = omega_emitter - omega_cavity``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class CavitySpecError(Exception):
    """Base class for all errors raised by this package."""


class NegativeRate(CavitySpecError, ValueError):
    pass


class NoDecayChannel(CavitySpecError, ValueError):
    pass


class Regime(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class SystemParams:
    """Emitter-cavity rates, all angular GHz.

    Use :func:`validate_params` to build one from untrusted numbers; the
    constructor performs the same checks.
    """

    g0: float
    kappa: float
    gamma: float
    gamma_p: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("g0", "kappa", "gamma", "gamma_p", "delta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("g0", "kappa", "gamma", "gamma_p"):
            if getattr(self, name) < 0:
                raise NegativeRate(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.kappa == 0 and self.gamma == 0:
            raise NoDecayChannel("at least one of kappa, gamma must be positive")

    def replace(self, **changes) -> "SystemParams":
        fields = dict(
            g0=self.g0,
            kappa=self.kappa,
            gamma=self.gamma,
            gamma_p=self.gamma_p,
            delta=self.delta,
        )
        fields.update(changes)
        return SystemParams(**fields)

    def as_dict(self) -> dict:
        return {
            "g0": self.g0,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "gamma_p": self.gamma_p,
            "delta": self.delta,
        }

    @property
    def linewidth_scale(self) -> float:
        """``g0 + kappa + gamma + gamma_p``, the natural spectral width."""
        return self.g0 + self.kappa + self.gamma + self.gamma_p


@dataclass(frozen=True)
class AmplitudeState:
    """Single-excitation amplitudes at one instant (``t`` in ns)."""

    e_amp: complex
    c_amp: complex
    t: float

    @property
    def population(self) -> float:
        return abs(self.e_amp) ** 2 + abs(self.c_amp) ** 2


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Amplitudes on a time grid, interaction-picture emitter frame.

    ``e`` and ``c`` are complex arrays aligned with ``t``.
    """

    t: np.ndarray
    e: np.ndarray
    c: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> AmplitudeState:
        return AmplitudeState(complex(self.e[i]), complex(self.c[i]), float(self.t[i]))

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.e) ** 2 + np.abs(self.c) ** 2


def validate_params(g0, kappa, gamma, gamma_p=0.0, delta=0.0) -> SystemParams:
    """Build a :class:`SystemParams`, raising on unphysical input.

    >>> validate_params(8, 1.6, 0.32, 0, 0).g0
    8.0
    """
    return SystemParams(g0, kappa, gamma, gamma_p, delta)


def system_matrix(params: SystemParams) -> np.ndarray:
    """Generator of the dephasing-free amplitude equations.

    Acts on ``(E * exp(-1j*delta*t), C)``, the emitter amplitude taken in a
    frame co-rotating with the detuning, which makes it time independent.
    """
    g0, kappa, gamma, delta = params.g0, params.kappa, params.gamma, params.delta
    return np.array(
        [[-gamma - 1j * delta, -1j * g0], [-1j * g0, -kappa + 0j]],
        dtype=complex,
    )


def system_eigenvalues(params: SystemParams) -> np.ndarray:
    """Eigenvalues of :func:`system_matrix`, ordered by imaginary part."""
    mat = system_matrix(params)
    half_trace = 0.5 * np.trace(mat)
    disc = np.sqrt(half_trace**2 - np.linalg.det(mat) + 0j)
    lam = np.array([half_trace - disc, half_trace + disc])
    return lam[np.argsort(lam.imag, kind="stable")]


def moment_matrix(params: SystemParams) -> np.ndarray:
    """Noise-averaged generator acting on ``(n_E, n_C, Re s, Im s)``.

    See :mod:`cavityspec.regression` for the equations.
    """
    g0, kappa, gamma, delta = params.g0, params.kappa, params.gamma, params.delta
    rate = gamma + kappa + params.gamma_p
    return np.array(
        [
            [-2 * gamma, 0.0, 0.0, 2 * g0],
            [0.0, -2 * kappa, 0.0, -2 * g0],
            [0.0, 0.0, -rate, -delta],
            [-g0, g0, delta, -rate],
        ]
    )


def emitter_regression_matrix(params: SystemParams) -> np.ndarray:
    g0 = params.g0
    return np.array(
        [
            [-params.gamma + 0j, -1j * g0],
            [-1j * g0, -(params.kappa + params.gamma_p) + 1j * params.delta],
        ]
    )


def cavity_regression_matrix(params: SystemParams) -> np.ndarray:
    g0 = params.g0
    return np.array(
        [
            [-params.kappa + 0j, -1j * g0],
            [-1j * g0, -(params.gamma + params.gamma_p) - 1j * params.delta],
        ]
    )


def classify_regime(params: SystemParams) -> Regime:
    """Strong coupling iff ``g0**2 > ((kappa - gamma)/2)**2``.

    Detuning is deliberately ignored: this is the resonant criterion.
    """
    if params.g0**2 > (0.5 * (params.kappa - params.gamma)) ** 2:
        return Regime.STRONG
    return Regime.WEAK


def rabi_splitting(params: SystemParams) -> float:
    """Resonant eigenvalue splitting ``2*sqrt(g0**2 - ((kappa-gamma)/2)**2)``.

    Returns 0 in the weak-coupling regime.
    """
    arg = params.g0**2 - (0.5 * (params.kappa - params.gamma)) ** 2
    return 2.0 * math.sqrt(arg) if arg > 0 else 0.0


@dataclass(frozen=True)
class NumericalGrid:
    """Time and frequency discretisation shared by the grid-based backends.

    ``dt`` is the fine integration step.  Two-time correlations are kept on a
    coarser lattice: the outer time axis uses every ``t_stride``-th fine
    step and the delay axis every ``tau_stride``-th one (``t_stride`` is a
    multiple of ``tau_stride``).
    """

    t_max: float
    dt: float
    n_t: int
    omega_min: float
    omega_max: float
    n_omega: int
    tau_max: float
    n_tau: int
    t_stride: int = 1
    tau_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_t < 1 or self.n_tau < 1:
            raise ValueError("n_t and n_tau must be >= 1")
        if not math.isclose(self.t_max, self.n_t * self.dt, rel_tol=1e-12):
            raise ValueError("t_max must equal n_t * dt")
        if not math.isclose(self.tau_max, self.n_tau * self.dt, rel_tol=1e-12):
            raise ValueError("tau_max must equal n_tau * dt")
        if self.tau_stride < 1 or self.t_stride % self.tau_stride:
            raise ValueError("t_stride must be a positive multiple of tau_stride")
        if self.n_t % self.t_stride or self.n_tau % self.tau_stride:
            raise ValueError("n_t, n_tau must be multiples of their strides")
        if not (self.omega_max > self.omega_min and self.n_omega >= 2):
            raise ValueError("omega grid must be strictly increasing")

    @property
    def omega(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.n_omega)

    @property
    def t_outer(self) -> np.ndarray:
        return np.arange(self.n_t // self.t_stride + 1) * (self.t_stride * self.dt)

    @property
    def tau(self) -> np.ndarray:
        return np.arange(self.n_tau // self.tau_stride + 1) * (self.tau_stride * self.dt)

    def covers(self, params: SystemParams) -> bool:
        """True if the omega window holds 0 and ``delta`` with a 5W margin."""
        margin = 5.0 * params.linewidth_scale
        lo = min(0.0, params.delta) - margin
        hi = max(0.0, params.delta) + margin
        return self.omega_min <= lo + 1e-9 * abs(lo) and self.omega_max >= hi - 1e-9 * abs(hi)


def default_dt(params: SystemParams) -> float:
    return 0.1 / max(
        params.g0, params.kappa, params.gamma, abs(params.delta) + params.gamma_p, 1.0
    )


def default_omega_window(params: SystemParams) -> tuple[float, float]:
    w = params.linewidth_scale
    return -5.0 * w + min(0.0, params.delta), 5.0 * w + max(0.0, params.delta)
