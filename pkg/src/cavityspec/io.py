"""CSV, JSON manifest and SVG writers.

Every data file starts with a ``# manifest sha256=<hex>`` comment line
followed by a CSV header.  Floats are written with ``repr``, the shortest
string that round-trips to the same IEEE-754 double.  Manifests hold no
timestamps, so identical runs hash identically.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from html import escape
from typing import Mapping, Optional, Sequence

import numpy as np

from .spectra import Spectrum

MANIFEST_PREFIX = "# manifest sha256="


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def manifest_hash(manifest: Mapping) -> str:
    body = {k: v for k, v in manifest.items() if k != "sha256"}
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def write_manifest(path, manifest: Mapping) -> str:
    """Write ``manifest`` plus its own hash as pretty JSON; returns the hash."""
    digest = manifest_hash(manifest)
    out = dict(_plain(dict(manifest)))
    out["sha256"] = digest
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(out, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return digest


def fmt(value) -> str:
    if value is None:
        return ""
    v = float(value)
    return "" if math.isnan(v) else repr(v)


def _write_rows(path, header: Sequence[str], columns, digest: Optional[str]):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if digest is not None:
            fh.write(f"{MANIFEST_PREFIX}{digest}\n")
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_spectrum_csv(path, spec: Spectrum, digest: Optional[str] = None, mix: Optional[float] = None):
    header = ["omega_ghz", "s_e", "s_c"]
    cols = [spec.omega, spec.s_e, spec.s_c]
    if spec.s_e_err is not None and spec.s_c_err is not None:
        header += ["s_e_err", "s_c_err"]
        cols += [spec.s_e_err, spec.s_c_err]
    if mix is not None:
        header.append("s_mix")
        cols.append(spec.mixed(mix))
    _write_rows(path, header, cols, digest)


def read_csv(path) -> tuple[Optional[str], dict]:
    """Manifest hash (or None) and a column dict; empty fields become NaN."""
    digest = None
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith(MANIFEST_PREFIX):
        digest = lines[0][len(MANIFEST_PREFIX):]
        lines = lines[1:]
    header = lines[0].split(",")
    rows = [[float(v) if v else math.nan for v in ln.split(",")] for ln in lines[1:] if ln]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return digest, {h: data[:, i] for i, h in enumerate(header)}


def read_spectrum_csv(path) -> Spectrum:
    _, cols = read_csv(path)
    return Spectrum(
        omega=cols["omega_ghz"],
        s_e=cols["s_e"],
        s_c=cols["s_c"],
        s_e_err=cols.get("s_e_err"),
        s_c_err=cols.get("s_c_err"),
        backend="file",
    )


def write_sweep_csv(path, result, digest: Optional[str] = None):
    d, g = np.meshgrid(result.deltas, result.gamma_ps, indexing="ij")
    _write_rows(
        path,
        ["delta_ghz", "gamma_p_ghz", "left_peak_ratio", "cavity_fraction", "n_peaks"],
        [d.ravel(), g.ravel(), result.left_peak_ratio.ravel(), result.cavity_fraction.ravel(), result.n_peaks.ravel()],
        digest,
    )


def write_mech_trace_csv(path, t, f, x, digest: Optional[str] = None):
    _write_rows(path, ["t_ns", "f", "x"], [t, f, x], digest)


def write_power_csv(path, omega, power, digest: Optional[str] = None):
    _write_rows(path, ["omega", "power"], [omega, power], digest)


def write_table_csv(path, header: Sequence[str], rows, digest: Optional[str] = None):
    """Generic writer for small mixed tables; strings are written verbatim."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if digest is not None:
            fh.write(f"{MANIFEST_PREFIX}{digest}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

_COLOURS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#5d6d7e")


def _ticks(lo, hi, n=5):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * span:
        out.append(round(v, 12))
        v += step
    return out


def write_svg(
    path,
    x,
    series: Mapping[str, Sequence[float]],
    xlabel: str = "Omega (GHz)",
    ylabel: str = "S (1/GHz)",
    title: str = "",
    width: int = 640,
    height: int = 400,
    digest: Optional[str] = None,
):
    """Static line plot, one polyline per entry of ``series``."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    left, right, top, bottom = 70, 20, 30 if title else 15, 50
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = float(x.min()), float(x.max())
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()]) if ys else np.zeros(1)
    y0, y1 = min(0.0, float(finite.min())), float(finite.max())
    if y1 <= y0:
        y1 = y0 + 1.0

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if digest is not None:
        out.insert(1, f"<!-- manifest sha256={digest} -->")
    for v in _ticks(x0, x1):
        px = sx(v)
        out.append(f'<line x1="{px:.2f}" y1="{top + ph}" x2="{px:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{top + ph + 16}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        py = sy(v)
        out.append(f'<line x1="{left - 4}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{py + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    for i, (label, y) in enumerate(ys.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 14 + 14 * i
        out.append(f'<line x1="{left + pw - 90}" y1="{ly - 4}" x2="{left + pw - 70}" y2="{ly - 4}" stroke="{colour}"/>')
        out.append(f'<text x="{left + pw - 65}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
