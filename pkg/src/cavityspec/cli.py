"""Command line entry point: ``cavityspec <command> ...``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
The default output directory comes from ``$CAVITYSPEC_OUTPUT_DIR`` (else
``./cavityspec_out``).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import __version__, presets
from .analysis import BACKENDS, BackendMismatch, compute_spectrum, find_peaks, sweep
from .config import ConfigError, RunConfig, load_config
from .io import (
    ensure_dir,
    write_manifest,
    write_mech_trace_csv,
    write_power_csv,
    write_spectrum_csv,
    write_svg,
    write_sweep_csv,
    write_table_csv,
)
from .mechanical import piston_signal, power_spectrum, simulate_mass, spectral_weights
from .model import CavitySpecError, default_omega_window
from .spectra import spectrum_norms
from .stochastic import EnsembleConfig

log = logging.getLogger("cavityspec")

OUTPUT_ENV = "CAVITYSPEC_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def output_dir(arg) -> str:
    return ensure_dir(arg or os.environ.get(OUTPUT_ENV) or "cavityspec_out")


def _omega_for(cfg: RunConfig):
    p = cfg.params
    g = cfg.grid
    if g.omega_min is not None:
        return np.linspace(g.omega_min, g.omega_max, g.n_omega)
    return np.linspace(*default_omega_window(p), g.n_omega)


def _spectrum_manifest(cfg: RunConfig, spec) -> dict:
    i_e, i_c, frac = spectrum_norms(spec)
    peaks = find_peaks(spec, "C")
    man = {
        "command": "spectrum",
        "params": cfg.params.as_dict(),
        "backend": cfg.backend,
        "grid": dataclasses.asdict(cfg.grid),
        "mix": cfg.mix,
        "checks": {
            "total_emission": i_e + i_c,
            "cavity_fraction": frac,
            "n_peaks_s_c": len(peaks),
            "min_density": float(min(spec.s_e.min(), spec.s_c.min())),
        },
    }
    if cfg.backend == "monte_carlo":
        man["ensemble"] = dataclasses.asdict(cfg.ensemble)
        man["mc_dt"] = spec.meta.get("dt")
    return man


def run_spectrum(cfg: RunConfig, out: str) -> list[str]:
    omega = _omega_for(cfg)
    spec = compute_spectrum(cfg.params, cfg.backend, omega, cfg.ensemble, workers=cfg.workers)
    man = _spectrum_manifest(cfg, spec)
    stem = os.path.join(out, cfg.stem)
    digest = write_manifest(stem + ".manifest.json", man)
    write_spectrum_csv(stem + ".csv", spec, digest, cfg.mix)
    files = [stem + ".csv", stem + ".manifest.json"]
    if cfg.emit_svg:
        p = cfg.params
        write_svg(
            stem + ".svg",
            spec.omega,
            {"S_C": spec.s_c, "S_E": spec.s_e},
            title=f"g0={p.g0:g} kappa={p.kappa:g} gamma={p.gamma:g} gamma_p={p.gamma_p:g} delta={p.delta:g} GHz",
            digest=digest,
        )
        files.append(stem + ".svg")
    return files


def parse_range(text: str) -> np.ndarray:
    """``a:b:n`` -> ``linspace(a, b, n)``; a bare number -> that value."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise ValueError(f"expected a:b:n, got {text!r}")
    return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))


def parse_list(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v.strip()])


def run_sweep(cfg: RunConfig, deltas, gamma_ps, out: str) -> list[str]:
    res = sweep(cfg.params, deltas, gamma_ps, cfg.backend, cfg.ensemble, workers=cfg.workers, n_omega=cfg.grid.n_omega)
    man = {
        "command": "sweep",
        "params": cfg.params.as_dict(),
        "backend": cfg.backend,
        "deltas": deltas,
        "gamma_ps": gamma_ps,
        "n_omega": cfg.grid.n_omega,
    }
    if cfg.backend == "monte_carlo":
        man["ensemble"] = dataclasses.asdict(cfg.ensemble)
    stem = os.path.join(out, cfg.stem + "_sweep")
    digest = write_manifest(stem + ".manifest.json", man)
    write_sweep_csv(stem + ".csv", res, digest)
    return [stem + ".csv", stem + ".manifest.json"]


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

def _spectrum_map(points, out, name, digest):
    rows = []
    for p in points:
        spec = compute_spectrum(p)
        for w, se, sc in zip(spec.omega, spec.s_e, spec.s_c):
            rows.append((p.delta, w, se, sc))
    path = os.path.join(out, name + ".csv")
    write_table_csv(path, ["delta_ghz", "omega_ghz", "s_e", "s_c"], rows, digest)
    return path


def run_figures(which: str, out: str, svg: bool = True, workers: int = 1) -> list[str]:
    man = {"command": "figures", "figure": which}
    files = []
    if which in ("fig2a", "fig2b"):
        gp = presets.FIG2A_GAMMA_P if which == "fig2a" else presets.FIG2B_GAMMA_P
        man["params"] = presets.FIG2_BASE.replace(gamma_p=gp).as_dict()
        man["deltas"] = presets.FIG2_DELTAS
        digest = write_manifest(os.path.join(out, which + ".manifest.json"), man)
        pts = presets.fig2_points(gp)
        files.append(_spectrum_map(pts, out, which, digest))
        totals = [sum(spectrum_norms(compute_spectrum(p))[:2]) for p in pts]
        files.append(os.path.join(out, which + "_totals.csv"))
        write_table_csv(files[-1], ["delta_ghz", "total_emission"], zip(presets.FIG2_DELTAS, totals), digest)
        if svg:
            mid = compute_spectrum(pts[len(pts) // 2])
            files.append(os.path.join(out, which + "_delta0.svg"))
            write_svg(files[-1], mid.omega, {"S_C": mid.s_c, "S_E": mid.s_e}, title=f"{which}, delta=0", digest=digest)
    elif which in ("fig3a", "fig3b"):
        if which == "fig3a":
            deltas, gps = presets.FIG3A_DELTAS, presets.FIG3A_GAMMA_PS
        else:
            deltas, gps = presets.FIG3B_DELTAS, presets.FIG3B_GAMMA_PS
        man.update(params=presets.FIG2_BASE.as_dict(), deltas=deltas, gamma_ps=gps)
        digest = write_manifest(os.path.join(out, which + ".manifest.json"), man)
        res = sweep(presets.FIG2_BASE, deltas, gps, workers=workers)
        files.append(os.path.join(out, which + ".csv"))
        write_sweep_csv(files[-1], res, digest)
        if svg:
            files.append(os.path.join(out, which + ".svg"))
            if which == "fig3a":
                series = {f"gamma_p={g:g}": res.left_peak_ratio[:, j] for j, g in enumerate(gps)}
                write_svg(files[-1], deltas, series, "Delta (GHz)", "left peak ratio", which, digest=digest)
            else:
                series = {f"delta={d:g}": res.cavity_fraction[i] for i, d in enumerate(deltas)}
                write_svg(files[-1], gps, series, "gamma_p (GHz)", "cavity fraction", which, digest=digest)
    elif which == "fig4":
        man.update(params=presets.FIG4_BASE.as_dict(), deltas=presets.FIG4_DELTAS, gamma_ps=presets.FIG4_GAMMA_PS)
        digest = write_manifest(os.path.join(out, which + ".manifest.json"), man)
        rows = []
        summary = []
        for d in presets.FIG4_DELTAS:
            # one shared window, wide enough for the most dephased spectrum
            widest = presets.FIG4_BASE.replace(delta=d, gamma_p=max(presets.FIG4_GAMMA_PS))
            omega = np.linspace(*default_omega_window(widest), 2048)
            specs = {g: compute_spectrum(presets.FIG4_BASE.replace(delta=d, gamma_p=g), omega=omega) for g in presets.FIG4_GAMMA_PS}
            for g, spec in specs.items():
                for w, sc, se in zip(spec.omega, spec.s_c, spec.s_e):
                    rows.append((d, g, w, se, sc))
                summary.append((d, g, float(spec.omega[np.argmax(spec.s_c)])))
            if svg:
                path = os.path.join(out, f"fig4_delta{d:g}.svg")
                series = {f"gamma_p={g:g}": specs[g].s_c for g in presets.FIG4_GAMMA_PS}
                write_svg(path, omega, series, title=f"fig4 S_C, delta={d:g}", digest=digest)
                files.append(path)
        files.append(os.path.join(out, "fig4.csv"))
        write_table_csv(files[-1], ["delta_ghz", "gamma_p_ghz", "omega_ghz", "s_e", "s_c"], rows, digest)
        files.append(os.path.join(out, "fig4_maxima.csv"))
        write_table_csv(files[-1], ["delta_ghz", "gamma_p_ghz", "s_c_max_omega_ghz"], summary, digest)
    elif which == "fig5":
        m = presets.FIG5_MECH
        man.update(mech=dataclasses.asdict(m), jump_rates=presets.FIG5_JUMP_RATES, t_max=presets.FIG5_T_MAX, dt=presets.FIG5_DT)
        digest = write_manifest(os.path.join(out, which + ".manifest.json"), man)
        t = np.arange(0.0, presets.FIG5_T_MAX, presets.FIG5_DT)
        keep = t >= presets.FIG5_DISCARD
        rows, series, omega = [], {}, None
        for rate in presets.FIG5_JUMP_RATES:
            mr = m.replace(jump_rate=rate)
            x = simulate_mass(mr, piston_signal(mr, t, 0), t)
            omega, power = power_spectrum(x[keep], t[keep])
            w_d, w_e = spectral_weights(x[keep], mr, t[keep])
            rows.append((rate, w_d, w_e, w_e / w_d))
            band = omega <= 3.0 * max(m.drive_freq, m.eigenfrequency)
            series[f"jump_rate={rate:g}"] = np.log10(power[band] + 1e-300)
            path = os.path.join(out, f"fig5_power_rate{rate:g}.csv")
            write_power_csv(path, omega[band], power[band], digest)
            files.append(path)
        files.append(os.path.join(out, "fig5_weights.csv"))
        write_table_csv(files[-1], ["jump_rate", "weight_at_drive", "weight_at_eigen", "ratio"], rows, digest)
        if svg:
            files.append(os.path.join(out, "fig5.svg"))
            band = omega <= 3.0 * max(m.drive_freq, m.eigenfrequency)
            write_svg(files[-1], omega[band], series, "omega (rad/ns)", "log10 power", "fig5 mass spectrum", digest=digest)
    else:
        raise ValueError(f"unknown figure {which!r}")
    return [os.path.join(out, which + ".manifest.json")] + files


def run_mech(cfg: RunConfig, out: str) -> list[str]:
    run = cfg.mech
    m = run.params
    t = np.arange(0.0, run.t_max, run.dt)
    f = piston_signal(m, t, run.seed)
    x = simulate_mass(m, f, t)
    keep = t >= run.discard
    omega, power = power_spectrum(x[keep], t[keep])
    man = {"command": "mech", "mech": dataclasses.asdict(m), "run": {k: v for k, v in dataclasses.asdict(run).items() if k != "params"}}
    try:
        w_d, w_e = spectral_weights(x[keep], m, t[keep])
        man["weights"] = {"drive": w_d, "eigen": w_e}
    except (CavitySpecError, ValueError) as exc:
        man["weights"] = {"error": str(exc)}
    stem = os.path.join(out, cfg.stem + "_mech")
    digest = write_manifest(stem + ".manifest.json", man)
    write_mech_trace_csv(stem + "_trace.csv", t, f, x, digest)
    write_power_csv(stem + "_power.csv", omega, power, digest)
    return [stem + "_trace.csv", stem + "_power.csv", stem + ".manifest.json"]


# --------------------------------------------------------------------------
# argparse
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavityspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./cavityspec_out)")
        p.add_argument("--workers", type=int, default=None, help="worker threads")

    sp = sub.add_parser("spectrum", help="compute S_E and S_C for one configuration")
    sp.add_argument("--config", required=True)
    sp.add_argument("--backend", choices=BACKENDS)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--svg", action="store_true")
    sp.add_argument("--mix", type=float, help="also write a*S_E + (1-a)*S_C")
    common(sp)

    sw = sub.add_parser("sweep", help="peak ratio and cavity fraction over (delta, gamma_p)")
    sw.add_argument("--config", required=True)
    sw.add_argument("--delta", required=True, help="a:b:n or a single value")
    sw.add_argument("--gamma-p", required=True, help="comma-separated list")
    sw.add_argument("--backend", choices=BACKENDS)
    sw.add_argument("--seed", type=int)
    common(sw)

    fg = sub.add_parser("figures", help="regenerate the data behind a figure")
    fg.add_argument("which", choices=presets.FIGURES + ("all",))
    fg.add_argument("--no-svg", action="store_true")
    common(fg)

    mc = sub.add_parser("mech", help="piston-mass analogue simulation")
    mc.add_argument("--config", required=True)
    mc.add_argument("--seed", type=int)
    common(mc)

    va = sub.add_parser("validate", help="run the cross-backend acceptance checks")
    va.add_argument("--fast", action="store_true", help="100x smaller Monte Carlo ensembles")
    va.add_argument("--seed", type=int)
    common(va)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "backend", None):
        changes["backend"] = args.backend
    if getattr(args, "seed", None) is not None:
        changes["ensemble"] = EnsembleConfig(cfg.ensemble.n_traj, args.seed, cfg.ensemble.batch_count)
    if getattr(args, "svg", False):
        changes["emit_svg"] = True
    if getattr(args, "mix", None) is not None:
        if not 0 <= args.mix <= 1:
            raise ConfigError("must lie in [0, 1]", key="--mix")
        changes["mix"] = args.mix
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("must be >= 1", key="--workers")
        changes["workers"] = args.workers
    cfg = dataclasses.replace(cfg, **changes)
    if cfg.backend == "closed_form" and cfg.params is not None and cfg.params.gamma_p > 0:
        raise ConfigError("closed_form backend requires gamma_p = 0", key="backend")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            from .validation import DEFAULT_SEED, run_validate

            out = os.path.join(output_dir(args.out), "validate")
            results = run_validate(
                fast=args.fast,
                workers=args.workers or 1,
                seed=DEFAULT_SEED if args.seed is None else args.seed,
                out_dir=out,
            )
            failed = [r.key for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
            return EXIT_FAIL if failed else EXIT_OK
        if args.command == "figures":
            out = output_dir(args.out)
            targets = presets.FIGURES if args.which == "all" else (args.which,)
            for which in targets:
                for path in run_figures(which, out, svg=not args.no_svg, workers=args.workers or 1):
                    print(path)
            return EXIT_OK
        if args.command == "mech":
            cfg = load_config(args.config, require_system=False)
            if cfg.mech is None:
                raise ConfigError("a [mech] table is required", key="mech")
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, mech=dataclasses.replace(cfg.mech, seed=args.seed))
            files = run_mech(cfg, output_dir(args.out or cfg.output_dir))
        else:
            cfg = _apply_overrides(load_config(args.config), args)
            out = output_dir(args.out or cfg.output_dir)
            if args.command == "spectrum":
                files = run_spectrum(cfg, out)
            else:
                try:
                    deltas, gps = parse_range(args.delta), parse_list(args.gamma_p)
                except ValueError as exc:
                    raise ConfigError(str(exc), key="--delta/--gamma-p") from None
                if deltas.size == 0 or gps.size == 0:
                    raise ConfigError("need at least one value", key="--delta/--gamma-p")
                files = run_sweep(cfg, deltas, gps, out)
        for path in files:
            print(path)
        return EXIT_OK
    except (ConfigError, BackendMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command != "validate" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
