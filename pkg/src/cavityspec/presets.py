"""Named parameter sets for the published figures and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .mechanical import MechParams
from .model import SystemParams

# strongly coupled micropillar-like system (Figs. 2 and 3)
FIG2_BASE = SystemParams(g0=8.0, kappa=1.6, gamma=0.32)
# Reithmaier-like parameters (Fig. 4)
FIG4_BASE = SystemParams(g0=38.0, kappa=43.0, gamma=0.1)

FIG2_DELTAS = np.arange(-40.0, 40.0 + 1e-9, 2.0)
FIG2A_GAMMA_P = 0.0
FIG2B_GAMMA_P = 5.0

FIG3A_DELTAS = np.arange(0.0, 80.0 + 1e-9, 2.0)
FIG3A_GAMMA_PS = (0.0, 1.0, 5.0, 10.0)
FIG3B_DELTAS = (0.0, 8.0, 24.0, 40.0)
FIG3B_GAMMA_PS = np.arange(0.0, 20.0 + 1e-9, 0.5)

FIG4_DELTAS = (0.0, 20.0, 40.0, 60.0, 80.0, 100.0)
FIG4_GAMMA_PS = (0.0, 20.0)

# Monte Carlo cross-check detunings at the Fig. 2(b) dephasing rate
MC_CHECK_DELTAS = (0.0, 8.0, 16.0, 24.0)

# piston-mass demo: eigenfrequency 2 rad/ns, drive 5 band-widths away
FIG5_MECH = MechParams(k_c=2.0, g_c=2.0, kappa_c=0.2, drive_freq=4.0, jump_rate=0.0, amplitude=1.0)
FIG5_JUMP_RATES = (0.0, 0.1, 1.0)
FIG5_T_MAX = 1000.0
FIG5_DT = 0.02
FIG5_DISCARD = 100.0

FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5")


def fig2_points(gamma_p: float) -> list[SystemParams]:
    return [FIG2_BASE.replace(delta=float(d), gamma_p=gamma_p) for d in FIG2_DELTAS]


def conservation_points() -> list[SystemParams]:
    """Every (delta, gamma_p) appearing in the Fig. 2 and Fig. 3 presets."""
    pts = fig2_points(FIG2A_GAMMA_P) + fig2_points(FIG2B_GAMMA_P)
    pts += [FIG2_BASE.replace(delta=float(d), gamma_p=g) for d in FIG3A_DELTAS for g in FIG3A_GAMMA_PS]
    pts += [FIG2_BASE.replace(delta=d, gamma_p=float(g)) for d in FIG3B_DELTAS for g in FIG3B_GAMMA_PS]
    return pts
