"""CSV / JSON writers with exact, byte-stable text output.

Floats are written with 17 significant digits so that every double survives a
round trip; rows end in ``\\n`` with no trailing separator.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .action import Trajectory
from .errors import InputError

NL = "\n"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return NL.join(lines) + NL


def write_text(path, text):
    # newline="" keeps "\n" on every platform
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# trajectories


def trajectory_header(n):
    return ["t"] + [f"q{i}" for i in range(n)]


def trajectory_csv(traj: Trajectory) -> str:
    return csv_text(trajectory_header(traj.n), np.column_stack([traj.t, traj.nodes]))


def export_trajectory_csv(traj: Trajectory, path):
    write_text(path, trajectory_csv(traj))


def import_trajectory_csv(path, expected_N=None) -> Trajectory:
    """Read a trajectory back; the time column must be the uniform grid ``linspace(0, T, N+1)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split(NL)
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise InputError(f"{path}: empty file")
    header = lines[0].split(",")
    n = len(header) - 1
    if n < 1 or header != trajectory_header(n):
        raise InputError(f"{path}: header must be t,q0..q{{n-1}}")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != n + 1:
        raise InputError(f"{path}: ragged rows")
    N = data.shape[0] - 1
    if expected_N is not None and N != expected_N:
        raise InputError(f"{path}: {N + 1} nodes, expected {expected_N + 1}")
    T = data[-1, 0]
    grid = np.linspace(0.0, T, N + 1)
    if not np.allclose(data[:, 0], grid, rtol=0, atol=1e-12 * max(1.0, abs(T))):
        raise InputError(f"{path}: time column is not a uniform grid from 0")
    return Trajectory(data[:, 1:], T)


# ---------------------------------------------------------------------------
# dynamics, sweeps, tables


def dynamics_csv(result) -> str:
    n = result.positions.shape[1]
    header = ["t"] + [f"q{i}" for i in range(n)]
    cols = [result.t, result.positions]
    if result.velocities is not None:
        header += [f"dq{i}" for i in range(n)]
        cols.append(result.velocities)
    header.append("energy")
    cols.append(result.energy)
    return csv_text(header, np.column_stack(cols))


def sweep_csv(sweep) -> str:
    from .limits import SWEEP_COLUMNS

    return csv_text(SWEEP_COLUMNS, sweep.rows())


def export_sweep_csv(sweep, path):
    write_text(path, sweep_csv(sweep))


def jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + NL


def write_json(path, obj):
    write_text(path, json_text(obj))


# ---------------------------------------------------------------------------
# plots


def svg_line_plot(t, series, labels=None, title="", width=640, height=360) -> str:
    """Static SVG line plot of ``series`` (columns) against ``t``."""
    t = np.asarray(t, dtype=float)
    Y = np.asarray(series, dtype=float).reshape(len(t), -1)
    pad = 40
    x0, x1 = float(t[0]), float(t[-1])
    finite = Y[np.isfinite(Y)]
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 - y0 < 1e-300:
        y0, y1 = y0 - 1.0, y1 + 1.0
    sx = (width - 2 * pad) / max(x1 - x0, 1e-300)
    sy = (height - 2 * pad) / (y1 - y0)
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
    # thin long series so the file stays small
    stride = max(1, len(t) // 2000)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="#444"/>',
           f'<text x="{width / 2:.1f}" y="{pad / 2:.1f}" text-anchor="middle" '
           f'font-family="sans-serif" font-size="13">{_esc(title)}</text>',
           f'<text x="{pad}" y="{height - pad / 3:.1f}" font-family="sans-serif" '
           f'font-size="11">t = {x0:.3g} .. {x1:.3g}; y = {y0:.3g} .. {y1:.3g}</text>']
    for j in range(Y.shape[1]):
        pts = " ".join(f"{pad + (ti - x0) * sx:.2f},{height - pad - (yi - y0) * sy:.2f}"
                       for ti, yi in zip(t[::stride], Y[::stride, j]) if math.isfinite(yi))
        out.append(f'<polyline fill="none" stroke="{colors[j % len(colors)]}" '
                   f'stroke-width="1.5" points="{pts}"/>')
        if labels:
            out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * (j + 1)}" font-family="sans-serif" '
                       f'font-size="11" fill="{colors[j % len(colors)]}">{_esc(labels[j])}</text>')
    out.append("</svg>")
    return NL.join(out) + NL


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def ensure_dir(path):
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
