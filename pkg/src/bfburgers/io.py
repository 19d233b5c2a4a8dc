"""Run-directory files: lossless CSV, metadata JSON and bare SVG line plots."""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Sequence

import numpy as np


def fmt(v) -> str:
    """Shortest decimal that reads back to the same binary64."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def time_tag(t: float) -> str:
    return repr(float(t))


def write_csv(path, header: Sequence[str], columns) -> None:
    cols = [np.asarray(c) if not np.isscalar(c) else c for c in columns]
    n = max((len(c) for c in cols if not np.isscalar(c)), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([fmt(c if np.isscalar(c) else c[i]) for c in cols])


def write_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (int, float, np.floating, np.integer)) else v
                        for v in row])


def read_csv(path) -> dict:
    """Columns by header name, as float arrays (text columns stay strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = col
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# {{{ svg

def svg_polyline(path, series, title="", xlabel="x", ylabel="u", width=640, height=400) -> None:
    """``series``: list of (label, x, y).  No external renderer involved."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 40
    xs = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.zeros(1)
    good = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = (xs[good], ys[good]) if good.any() else (np.zeros(1), np.zeros(1))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    yr = y1 - y0
    y0, y1 = y0 - 0.05 * yr, y1 + 0.05 * yr
    w, h = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * w

    def py(y):
        return pad_t + (y1 - y) / (y1 - y0) * h

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{w}" height="{h}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})">{ylabel}</text>',
           f'<text x="{pad_l}" y="{pad_t + h + 15}" font-size="10">{x0:.4g}</text>',
           f'<text x="{pad_l + w}" y="{pad_t + h + 15}" font-size="10" text-anchor="end">{x1:.4g}</text>',
           f'<text x="{pad_l - 4}" y="{pad_t + h}" font-size="10" text-anchor="end">{y0:.4g}</text>',
           f'<text x="{pad_l - 4}" y="{pad_t + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for k, (label, x, y) in enumerate(series):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        c = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{pad_l + w - 4}" y="{pad_t + 14 + 13 * k}" font-size="11" '
                   f'text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")

# }}}


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return os.fspath(path)
