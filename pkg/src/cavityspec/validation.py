"""Cross-backend acceptance checks shared by ``cavityspec validate`` and the tests.

Each ``check_*`` function returns a :class:`CheckResult` with the measured
quantity next to its tolerance.  Checks never raise on a physics failure;
they report it.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import binomtest

from . import presets
from .analysis import (
    compute_spectrum,
    find_peaks,
    intensity_shift_check,
    relative_left_peak_intensity,
    sweep,
)
from .closed_form import closed_form_spectra, solve_amplitudes
from .io import manifest_hash, write_spectrum_csv, write_sweep_csv, write_table_csv
from .mechanical import weight_ratio
from .model import SystemParams, default_omega_window, rabi_splitting
from .regression import regression_correlations, regression_spectra
from .spectra import (
    amplitude_horizon,
    amplitude_spectra,
    correlations_to_spectra,
    default_grid,
    resolved_step,
    spectrum_norms,
)
from .stochastic import EnsembleConfig, default_mc_dt, ensemble_correlations

FULL_N_TRAJ = 20_000
# --fast divides the ensemble by this factor and widens statistical
# tolerances by its square root
FAST_FACTOR = 100
DEFAULT_SEED = 20240601


@dataclass
class CheckResult:
    key: str
    name: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.key} {self.name}: {self.measured} (tolerance {self.tolerance}) [{self.seconds:.1f}s]"


def _timed(fn: Callable[[], CheckResult]) -> CheckResult:
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    return res


# --------------------------------------------------------------------------
# 1. closed-form oracle
# --------------------------------------------------------------------------

def generic_spectra(params: SystemParams, omega, levels: int = 3):
    """Time-domain route: amplitudes -> correlations -> one-sided transform."""
    h = resolved_step(params, omega)
    n = int(amplitude_horizon(params) / h)
    n -= n % 2 ** (levels - 1)
    traj = solve_amplitudes(params, np.arange(n + 1) * h)
    return amplitude_spectra(traj, params, omega, levels=levels)


def random_oracle_params(n_sets: int = 20, seed: int = 1) -> list[SystemParams]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sets):
        g0, kappa, gamma = rng.uniform(0.1, 50.0, 3)
        out.append(SystemParams(g0, kappa, gamma, 0.0, rng.uniform(-100.0, 100.0)))
    return out


def check_closed_form_oracle(n_sets: int = 20, seed: int = 1, tol: float = 1e-6) -> CheckResult:
    worst = 0.0
    for p in random_oracle_params(n_sets, seed):
        omega = np.linspace(*default_omega_window(p), 2048)
        ref = closed_form_spectra(p, omega)
        got = generic_spectra(p, omega)
        for a, b in ((got.s_e, ref.s_e), (got.s_c, ref.s_c)):
            worst = max(worst, float(np.max(np.abs(a - b) / b)))
    return CheckResult(
        "C1", "closed-form oracle", worst < tol, f"max rel err {worst:.3g}", f"< {tol:g}, {n_sets} sets"
    )


# --------------------------------------------------------------------------
# 2. Monte Carlo vs regression (and 10. determinism)
# --------------------------------------------------------------------------

def mc_vs_regression(params: SystemParams, ensemble: EnsembleConfig, workers: int = 1):
    """MC spectrum and grid-regression spectrum on one shared lattice."""
    grid = default_grid(params, dt=default_mc_dt(params))
    mc = correlations_to_spectra(ensemble_correlations(params, ensemble, grid, workers), params, grid.omega)
    reg = correlations_to_spectra(regression_correlations(params, grid), params, grid.omega)
    return mc, reg


def compare_mc(mc, reg) -> dict:
    out = {}
    for c in ("e", "c"):
        a, b, err = getattr(mc, "s_" + c), getattr(reg, "s_" + c), getattr(mc, f"s_{c}_err")
        out[f"l2_{c}"] = float(np.linalg.norm(a - b) / np.linalg.norm(b))
        out[f"within3_{c}"] = float(np.mean(np.abs(a - b) <= 3.0 * err))
    return out


def check_mc_regression(
    n_traj: int = FULL_N_TRAJ,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    out_dir: Optional[str] = None,
    digest: Optional[str] = None,
    deltas=presets.MC_CHECK_DELTAS,
    l2_tol: float = 0.02,
    budget: float = 600.0,
) -> CheckResult:
    t0 = time.perf_counter()
    ensemble = EnsembleConfig(n_traj=n_traj, master_seed=seed, batch_count=50)
    coverage = 0.99
    if n_traj < FULL_N_TRAJ:
        # few trajectories per batch make the batch means visibly non-Gaussian
        l2_tol = l2_tol * math.sqrt(FULL_N_TRAJ / n_traj)
        coverage = 0.95
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    rows, spectra, ok = [], {}, True
    for d in deltas:
        p = presets.FIG2_BASE.replace(gamma_p=presets.FIG2B_GAMMA_P, delta=d)
        mc, reg = mc_vs_regression(p, ensemble, workers)
        m = compare_mc(mc, reg)
        spectra[d] = mc
        good = max(m["l2_e"], m["l2_c"]) < l2_tol and min(m["within3_e"], m["within3_c"]) >= coverage
        ok &= good
        rows.append((d, m["l2_e"], m["l2_c"], m["within3_e"], m["within3_c"]))
        if out_dir is not None:
            write_spectrum_csv(os.path.join(out_dir, f"mc_spectrum_delta{d:g}.csv"), mc, digest)
    elapsed = time.perf_counter() - t0
    if out_dir is not None:
        write_table_csv(
            os.path.join(out_dir, "mc_vs_regression.csv"),
            ["delta_ghz", "l2_e", "l2_c", "within3se_e", "within3se_c"],
            rows,
            digest,
        )
    worst_l2 = max(max(r[1], r[2]) for r in rows)
    worst_in = min(min(r[3], r[4]) for r in rows)
    ok &= elapsed < budget
    return CheckResult(
        "C2",
        "Monte Carlo vs regression",
        ok,
        f"max L2 {worst_l2:.4f}, min within-3SE {worst_in:.4f}, {elapsed:.0f}s",
        f"L2 < {l2_tol:g}, within-3SE >= {coverage:g}, < {budget:g}s, n_traj={n_traj}",
        details={"rows": rows, "spectra": spectra},
    )


def check_determinism(seed: int = DEFAULT_SEED, n_traj: int = 200, workers=(1, 3)) -> CheckResult:
    """Same seed, different thread counts, byte-identical CSV text."""
    import io as _io

    p = presets.FIG2_BASE.replace(gamma_p=presets.FIG2B_GAMMA_P, delta=24.0)
    ens = EnsembleConfig(n_traj=n_traj, master_seed=seed, batch_count=20)
    texts = []
    for w in workers:
        mc, _ = mc_vs_regression(p, ens, workers=w)
        buf = _io.StringIO()
        for row in zip(mc.omega, mc.s_e, mc.s_c, mc.s_e_err, mc.s_c_err):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        texts.append(buf.getvalue())
    same = all(t == texts[0] for t in texts)
    return CheckResult(
        "C10", "determinism across thread counts", same, "identical" if same else "differ", f"workers {workers}"
    )


# --------------------------------------------------------------------------
# 3. conservation
# --------------------------------------------------------------------------

def check_conservation(
    mc_spectra: Optional[dict] = None, out_dir=None, digest=None, mc_tol: float = 1e-2
) -> CheckResult:
    rows = []
    worst_det = 0.0
    for p in presets.conservation_points():
        omega = np.linspace(*default_omega_window(p), 2048)
        i_e, i_c, _ = spectrum_norms(regression_spectra(p, omega))
        err = abs(i_e + i_c - 1.0)
        if p.gamma_p == 0:
            c_e, c_c, _ = spectrum_norms(closed_form_spectra(p, omega))
            err = max(err, abs(c_e + c_c - 1.0))
        worst_det = max(worst_det, err)
        rows.append((p.delta, p.gamma_p, i_e + i_c))
    worst_mc = 0.0
    for d, spec in (mc_spectra or {}).items():
        i_e, i_c, _ = spectrum_norms(spec)
        worst_mc = max(worst_mc, abs(i_e + i_c - 1.0))
    if out_dir is not None:
        write_table_csv(os.path.join(out_dir, "conservation.csv"), ["delta_ghz", "gamma_p_ghz", "total"], rows, digest)
    ok = worst_det < 1e-3 and worst_mc < mc_tol
    mc_txt = f", MC {worst_mc:.2e} over {len(mc_spectra)} runs" if mc_spectra else ""
    return CheckResult(
        "C3",
        "conservation",
        ok,
        f"deterministic {worst_det:.2e} over {len(rows)} points{mc_txt}",
        f"1e-3 deterministic, {mc_tol:g} MC",
    )


# --------------------------------------------------------------------------
# 4, 5, 8. peak metrics
# --------------------------------------------------------------------------

def left_ratio(params: SystemParams, backend: str = "regression") -> Optional[float]:
    spec = compute_spectrum(params, backend)
    return relative_left_peak_intensity(find_peaks(spec, "C"), params.delta)


def check_asymptote(rel_tol: float = 0.05) -> CheckResult:
    b = presets.FIG2_BASE
    target = b.gamma**2 / (b.gamma**2 + b.kappa**2)
    r80 = left_ratio(b.replace(delta=80.0), "closed_form")
    r160 = left_ratio(b.replace(delta=160.0), "closed_form")
    rel = abs(r80 - target) / target
    monotone = abs(r160 - target) < abs(r80 - target)
    return CheckResult(
        "C4",
        "large-detuning asymptote",
        rel < rel_tol and monotone,
        f"ratio(80)={r80:.5f} ({rel:.1%} off {target:.5f}), ratio(160)={r160:.5f}, "
        f"monotone={'yes' if monotone else 'no'}",
        f"+-{rel_tol:.0%} relative",
        details={"r80": r80, "r160": r160, "target": target},
    )


def check_rabi(rel_tol: float = 0.05) -> CheckResult:
    p = presets.FIG2_BASE
    peaks = find_peaks(compute_spectrum(p, "closed_form"), "C")
    expected = rabi_splitting(p)
    if len(peaks) != 2:
        return CheckResult("C5", "Rabi splitting", False, f"{len(peaks)} peaks", "2 peaks")
    sep = abs(peaks.positions[1] - peaks.positions[0])
    rel = abs(sep - expected) / expected
    return CheckResult(
        "C5", "Rabi splitting", rel < rel_tol, f"{sep:.4f} GHz vs {expected:.4f} ({rel:.2%})", f"+-{rel_tol:.0%}"
    )


def check_single_peak() -> CheckResult:
    p = presets.FIG2_BASE.replace(gamma_p=10.0)
    peaks = find_peaks(compute_spectrum(p), "C")
    ratio = relative_left_peak_intensity(peaks, 0.0)
    return CheckResult(
        "C8",
        "single-peak handling",
        len(peaks) == 1 and ratio is None,
        f"{len(peaks)} peak(s), ratio={ratio}",
        "1 peak, None",
    )


# --------------------------------------------------------------------------
# 6. intensity shifting
# --------------------------------------------------------------------------

def check_intensity_shift(out_dir=None, digest=None) -> CheckResult:
    b = presets.FIG2_BASE
    ra = sweep(b, [0.0], [0.0, 1.0, 5.0, 10.0])
    fa = ra.cavity_fraction[0]
    a_ok = bool(np.all(np.diff(fa) < 0))
    gps = np.arange(0.0, 20.0 + 1e-9, 0.5)
    rb = sweep(b, [24.0, -24.0], gps)
    b_ok = True
    peaks_at = []
    for row in rb.cavity_fraction:
        k = int(np.argmax(row))
        peaks_at.append(float(gps[k]))
        b_ok &= 0 < k < len(gps) - 1
    rep = intensity_shift_check(b, 24.0, 0.0, 5.0, raise_on_failure=False)
    c_ok = rep.cavity_ratio_increased and rep.emitter_dominant_in_se
    if out_dir is not None:
        write_sweep_csv(os.path.join(out_dir, "shift_delta0.csv"), ra, digest)
        write_sweep_csv(os.path.join(out_dir, "shift_delta24.csv"), rb, digest)
    return CheckResult(
        "C6",
        "intensity shifting",
        a_ok and b_ok and c_ok,
        f"(a) fractions {np.round(fa, 4).tolist()} {'decreasing' if a_ok else 'NOT decreasing'}; "
        f"(b) argmax gamma_p at |delta|=24: {peaks_at} {'interior' if b_ok else 'NOT interior'}; "
        f"(c) S_C ratio {rep.ratio_low:.4g}->{rep.ratio_high:.4g}, "
        f"S_E emitter/cavity {rep.se_emitter_high:.3g}/{rep.se_cavity_high:.3g}",
        "(a) strict decrease (b) interior max on [0,20] (c) increase and S_E emitter-dominant",
        details={"a": a_ok, "b": b_ok, "c": c_ok},
    )


# --------------------------------------------------------------------------
# 7. Fig. 4
# --------------------------------------------------------------------------

def global_max_position(spec) -> float:
    return float(spec.omega[int(np.argmax(spec.s_c))])


def check_fig4() -> CheckResult:
    b = presets.FIG4_BASE
    parts, ok = [], True
    for d in (20.0, 40.0, 80.0):
        pos = global_max_position(compute_spectrum(b.replace(delta=d, gamma_p=20.0)))
        good = abs(pos) <= b.kappa
        ok &= good
        parts.append(f"gp=20 d={d:g}: {pos:.1f}{'' if good else '!'}")
    pos = global_max_position(compute_spectrum(b.replace(delta=80.0), "closed_form"))
    good = abs(pos - 80.0) <= b.kappa
    ok &= good
    parts.append(f"gp=0 d=80: {pos:.1f}{'' if good else '!'}")
    return CheckResult(
        "C7", "Fig. 4 cavity-frequency emission", ok, "; ".join(parts), f"within kappa={b.kappa:g} of target"
    )


# --------------------------------------------------------------------------
# 9. mechanical analogue
# --------------------------------------------------------------------------

def mechanical_ratios(n_seeds: int = 20, rates=presets.FIG5_JUMP_RATES) -> np.ndarray:
    t = np.arange(0.0, presets.FIG5_T_MAX, presets.FIG5_DT)
    m = presets.FIG5_MECH
    return np.array(
        [[weight_ratio(m.replace(jump_rate=r), t, seed, presets.FIG5_DISCARD) for r in rates] for seed in range(n_seeds)]
    )


def check_mechanical(n_seeds: int = 20, alpha: float = 0.05) -> CheckResult:
    r = mechanical_ratios(n_seeds)
    means = r.mean(axis=0)
    p_values = [
        binomtest(int(np.sum(r[:, k + 1] > r[:, k])), n_seeds, 0.5, alternative="greater").pvalue
        for k in range(r.shape[1] - 1)
    ]
    ok = bool(np.all(np.diff(means) > 0)) and max(p_values) < alpha
    return CheckResult(
        "C9",
        "mechanical analogue",
        ok,
        f"mean eigen/drive {[float(f'{v:.3g}') for v in means]}, sign-test p {[float(f'{v:.2g}') for v in p_values]}",
        f"increasing, p < {alpha:g}",
    )


# --------------------------------------------------------------------------
# frame trap
# --------------------------------------------------------------------------

def check_frame(delta: float = 60.0) -> CheckResult:
    """S_E must peak at the emitter line and S_C at one of the two lines.

    Runs the grid route (correlations then one-sided transforms), the place
    where a wrong rotating frame or swapped kernels would show up.
    """
    p = presets.FIG2_BASE.replace(delta=delta, gamma_p=presets.FIG2B_GAMMA_P)
    grid = default_grid(p, n_omega=1024)
    spec = correlations_to_spectra(regression_correlations(p, grid), p, grid.omega)
    pe = float(spec.omega[np.argmax(spec.s_e)])
    pc = float(spec.omega[np.argmax(spec.s_c)])
    tol = p.linewidth_scale
    ok = abs(pe - delta) < tol and min(abs(pc), abs(pc - delta)) < tol
    return CheckResult(
        "F", "emitter/cavity frame", ok, f"S_E max at {pe:.2f}, S_C max at {pc:.2f}", f"within {tol:g} of lines"
    )


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def validate_manifest(fast: bool, seed: int) -> dict:
    n_traj = FULL_N_TRAJ // FAST_FACTOR if fast else FULL_N_TRAJ
    return {"command": "validate", "fast": fast, "n_traj": n_traj, "seed": seed, "batch_count": 50}


def run_validate(
    fast: bool = False,
    workers: int = 1,
    seed: int = DEFAULT_SEED,
    out_dir: Optional[str] = None,
    echo: Optional[Callable[[str], None]] = print,
) -> list[CheckResult]:
    """Run every check, optionally writing CSV artefacts into ``out_dir``."""
    manifest = validate_manifest(fast, seed)
    digest = manifest_hash(manifest)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    results = []

    def emit(res):
        results.append(res)
        if echo is not None:
            echo(res.line())

    emit(_timed(check_closed_form_oracle))
    c2 = _timed(
        lambda: check_mc_regression(
            n_traj=manifest["n_traj"], seed=seed, workers=workers, out_dir=out_dir, digest=digest
        )
    )
    emit(c2)
    mc_tol = 1e-2 * math.sqrt(FULL_N_TRAJ / manifest["n_traj"])
    emit(_timed(lambda: check_conservation(c2.details["spectra"], out_dir, digest, mc_tol)))
    emit(_timed(check_asymptote))
    emit(_timed(check_rabi))
    emit(_timed(lambda: check_intensity_shift(out_dir, digest)))
    emit(_timed(check_fig4))
    emit(_timed(check_single_peak))
    emit(_timed(check_mechanical))
    emit(_timed(lambda: check_determinism(seed)))
    emit(_timed(check_frame))
    return results
