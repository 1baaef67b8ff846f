"""Deterministic experiment artifacts: CSV rows, JSON summaries, SVG plots.

Numeric artifacts are byte-stable for a fixed (config, seed): floats are
serialized with repr-faithful formatting and JSON keys are sorted.
Wall-clock and other volatile provenance go to a separate meta file that
determinism comparisons exclude.
"""

from __future__ import annotations

import json
import math
import os
from typing import Iterable, Optional, Sequence


def fmt_num(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)  # shortest exact round-trip representation
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_num(v) for v in row) + "\n")


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_meta(out_dir: str, *, wall_clock: float, config_digest: str, seed: int,
               subcommand: str, version: str) -> None:
    write_json(os.path.join(out_dir, "meta.json"), {
        "wall_clock_seconds": wall_clock,
        "config_digest": config_digest,
        "seed": seed,
        "subcommand": subcommand,
        "version": version,
    })


# ------------------------------------------------------------------- SVG

_SVG_W, _SVG_H = 640, 440
_MARGIN = 56


def _svg_open() -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]


def _axis_map(vals, lo_pix, hi_pix, logscale):
    vmin, vmax = min(vals), max(vals)
    if logscale:
        vmin, vmax = math.log10(vmin), math.log10(vmax)
    if vmax - vmin < 1e-12:
        vmin -= 0.5
        vmax += 0.5
    span = vmax - vmin

    def to_pix(v):
        x = math.log10(v) if logscale else v
        return lo_pix + (x - vmin) / span * (hi_pix - lo_pix)

    return to_pix, vmin, vmax


def loglog_plot(path: str, xs: Sequence[float], ys: Sequence[float], *,
                title: str, guide_slope: Optional[float] = None) -> bool:
    """Log-log scatter+line plot with an optional reference-slope guide.

    Returns False (and writes nothing) for an empty or non-positive series.
    """
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if not pts:
        return False
    sx, sy = zip(*pts)
    px, *_ = _axis_map(sx, _MARGIN, _SVG_W - _MARGIN, True)
    py, ymin, ymax = _axis_map(sy, _SVG_H - _MARGIN, _MARGIN, True)
    parts = _svg_open()
    parts.append(f'<text x="{_SVG_W // 2}" y="22" text-anchor="middle">{title}</text>')
    parts.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SVG_W - 2 * _MARGIN}" '
        f'height="{_SVG_H - 2 * _MARGIN}" fill="none" stroke="black"/>'
    )
    coords = [(px(x), py(y)) for x, y in pts]
    if len(coords) > 1:
        d = " ".join(f"{cx:.2f},{cy:.2f}" for cx, cy in coords)
        parts.append(f'<polyline points="{d}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    for (cx, cy), (x, y) in zip(coords, pts):
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3.5" fill="steelblue"/>')
        parts.append(f'<text x="{cx:.2f}" y="{cy - 8:.2f}" text-anchor="middle" '
                     f'font-size="10">({fmt_num(float(x))}, {fmt_num(float(y))})</text>')
    if guide_slope is not None and len(pts) > 1:
        x0, y0 = pts[0]
        x1 = pts[-1][0]
        y1 = y0 * (x1 / x0) ** guide_slope
        parts.append(
            f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y1):.2f}" '
            f'stroke="gray" stroke-dasharray="6,4"/>'
        )
        parts.append(f'<text x="{px(x1) - 4:.2f}" y="{py(y1) - 6:.2f}" text-anchor="end" '
                     f'fill="gray">slope {fmt_num(float(guide_slope))}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return True


def histogram_plot(path: str, values: Sequence[float], *, title: str,
                   bins: int = 30) -> bool:
    """Fixed-geometry histogram; returns False for an empty series."""
    vals = [float(v) for v in values if not math.isnan(float(v))]
    if not vals:
        return False
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo -= 0.5
        hi += 0.5
    counts = [0] * bins
    for v in vals:
        idx = min(int((v - lo) / (hi - lo) * bins), bins - 1)
        counts[idx] += 1
    peak = max(counts)
    parts = _svg_open()
    parts.append(f'<text x="{_SVG_W // 2}" y="22" text-anchor="middle">{title}</text>')
    width = (_SVG_W - 2 * _MARGIN) / bins
    for i, c in enumerate(counts):
        h = 0 if peak == 0 else (c / peak) * (_SVG_H - 2 * _MARGIN)
        x = _MARGIN + i * width
        y = _SVG_H - _MARGIN - h
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}" '
                     f'height="{h:.2f}" fill="steelblue" stroke="white"/>')
    parts.append(f'<text x="{_MARGIN}" y="{_SVG_H - _MARGIN + 16}">{fmt_num(lo)}</text>')
    parts.append(f'<text x="{_SVG_W - _MARGIN}" y="{_SVG_H - _MARGIN + 16}" '
                 f'text-anchor="end">{fmt_num(hi)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return True
