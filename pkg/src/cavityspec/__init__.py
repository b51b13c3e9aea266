"""Emission spectra of a dephased emitter in a lossy microcavity."""

from .model import (
    AmplitudeState,
    AmplitudeTrajectory,
    CavitySpecError,
    NegativeRate,
    NoDecayChannel,
    NumericalGrid,
    Regime,
    SystemParams,
    classify_regime,
    system_eigenvalues,
    system_matrix,
    validate_params,
)
from .spectra import Spectrum, correlations_to_spectra, spectrum_norms
from .analysis import compute_spectrum, find_peaks, relative_left_peak_intensity, sweep

__version__ = "0.1.0"

__all__ = [
    "AmplitudeState",
    "AmplitudeTrajectory",
    "CavitySpecError",
    "NegativeRate",
    "NoDecayChannel",
    "NumericalGrid",
    "Regime",
    "Spectrum",
    "SystemParams",
    "classify_regime",
    "compute_spectrum",
    "correlations_to_spectra",
    "find_peaks",
    "relative_left_peak_intensity",
    "spectrum_norms",
    "sweep",
    "system_eigenvalues",
    "system_matrix",
    "validate_params",
]
