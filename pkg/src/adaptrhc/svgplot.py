"""Minimal stacked line plots written straight to SVG."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

_W, _PANEL_H = 720, 200
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 20, 30, 40
_MAX_POINTS = 2000


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return format(v, ".4g")


def _decimate(t: np.ndarray, v: np.ndarray):
    if t.size <= _MAX_POINTS:
        return t, v
    idx = np.unique(np.linspace(0, t.size - 1, _MAX_POINTS).astype(int))
    return t[idx], v[idx]


def _panel(out: list, top: float, title: str, t, series):
    """One axes box; ``series`` is a list of (label, values, dashed)."""
    x0, x1 = _LEFT, _W - _RIGHT
    y0, y1 = top + _TOP, top + _PANEL_H - _BOTTOM
    finite = [v[np.isfinite(v)] for _, v, _ in series]
    finite = [f for f in finite if f.size]
    tmin, tmax = (float(t[0]), float(t[-1])) if t.size else (0.0, 1.0)
    if tmax <= tmin:
        tmax = tmin + 1.0
    if finite:
        vmin = float(min(f.min() for f in finite))
        vmax = float(max(f.max() for f in finite))
    else:
        vmin, vmax = 0.0, 1.0
    if vmax <= vmin:
        pad = 1.0 if vmin == 0 else 0.05 * abs(vmin)
        vmin, vmax = vmin - pad, vmax + pad

    def px(tv):
        return x0 + (tv - tmin) / (tmax - tmin) * (x1 - x0)

    def py(vv):
        return y1 - (vv - vmin) / (vmax - vmin) * (y1 - y0)

    out.append(f'<text x="{x0}" y="{top + 18}" font-size="13" font-weight="bold">{escape(title)}</text>')
    out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
               'fill="none" stroke="#444" stroke-width="1"/>')
    for tv in nice_ticks(tmin, tmax):
        X = px(tv)
        out.append(f'<line x1="{X:.2f}" y1="{y1}" x2="{X:.2f}" y2="{y1 + 4}" stroke="#444"/>')
        out.append(f'<text x="{X:.2f}" y="{y1 + 16}" font-size="10" text-anchor="middle">{_fmt(tv)}</text>')
    for vv in nice_ticks(vmin, vmax, 4):
        Y = py(vv)
        out.append(f'<line x1="{x0 - 4}" y1="{Y:.2f}" x2="{x1}" y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{Y + 3:.2f}" font-size="10" text-anchor="end">{_fmt(vv)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{y1 + 30}" font-size="10" text-anchor="middle">t (days)</text>')

    for i, (label, v, dashed) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        tt, vv = _decimate(np.asarray(t, dtype=float), np.asarray(v, dtype=float))
        # break the line at non-finite samples
        runs, cur = [], []
        for a, b in zip(tt, vv):
            if math.isfinite(b):
                cur.append(f"{px(a):.2f},{py(b):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        for pts in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                       f'points="{" ".join(pts)}"/>')
        lx = x1 - 150
        ly = y0 + 14 + 14 * i
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" font-size="11">{escape(label)}</text>')


def write_figure(path, title: str, t, panels) -> None:
    """Write stacked panels; ``panels`` is a list of (title, series)."""
    t = np.asarray(t, dtype=float)
    height = _PANEL_H * len(panels) + 30
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{height}" '
           f'viewBox="0 0 {_W} {height}" font-family="sans-serif">',
           f'<rect width="{_W}" height="{height}" fill="white"/>',
           f'<text x="{_W / 2}" y="20" font-size="15" text-anchor="middle">{escape(title)}</text>']
    for i, (ptitle, series) in enumerate(panels):
        _panel(out, 30 + i * _PANEL_H, ptitle, t, series)
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def figure_paths(svg_path) -> dict[str, Path]:
    """``run.svg`` -> ``run_states.svg``, ``run_controls.svg``, ``run_estimates.svg``."""
    p = Path(svg_path)
    stem = p.with_suffix("") if p.suffix.lower() == ".svg" else p
    return {kind: stem.with_name(f"{stem.name}_{kind}.svg")
            for kind in ("states", "controls", "estimates")}


def write_run_plots(traj, svg_path, param_names=(), name="run") -> list[Path]:
    """Drive/response overlay, controls, and estimates against the truth."""
    paths = figure_paths(svg_path)
    k = len(traj)
    t = traj.t[:k]
    labels = ("uninfected CD4+ T cells", "infected CD4+ T cells", "free virions")

    states = [(f"{labels[i] if traj.n == 3 else f'state {i + 1}'}",
               [(f"x{i + 1} drive", traj.x[:k, i], False), (f"y{i + 1} response", traj.y[:k, i], True)])
              for i in range(traj.n)]
    write_figure(paths["states"], f"{name}: drive and response states", t, states)

    controls = [(f"u{i + 1}", [(f"u{i + 1}", traj.u[:k, i], False)]) for i in range(traj.n)]
    write_figure(paths["controls"], f"{name}: control inputs", t, controls)

    names = list(param_names) or [f"theta{j + 1}" for j in range(traj.p)]
    estimates = [(names[j], [(f"{names[j]} estimate", traj.theta_hat[:k, j], False),
                             (f"{names[j]} true", traj.theta_true[:k, j], True)])
                 for j in range(traj.p)]
    write_figure(paths["estimates"], f"{name}: parameter estimates", t, estimates)
    return list(paths.values())
