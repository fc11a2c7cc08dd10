"""File writers: CSV tables, JSON reports and plain SVG plots."""
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "write_json", "to_jsonable", "boundary_svg", "line_svg"]

SIZE = 800


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path, header, rows):
    """Comma separated, header row, LF line endings, ``repr`` floats."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def to_jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers for ``json``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    return obj


def write_json(path, doc):
    text = json.dumps(to_jsonable(doc), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _svg(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">\n'
            f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>\n{body}</svg>\n')


def _path(xs, ys, closed=False):
    pts = " L ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    return "M " + pts + (" Z" if closed else "")


def boundary_svg(path, curves, labels=None):
    """Closed curves (complex point arrays) in the unit-disc viewport."""
    c, s = SIZE / 2, 0.45 * SIZE
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [f'<circle cx="{c}" cy="{c}" r="{s}" fill="none" stroke="#999" stroke-width="1"/>\n',
             f'<line x1="{c - s}" y1="{c}" x2="{c + s}" y2="{c}" stroke="#ddd"/>\n',
             f'<line x1="{c}" y1="{c - s}" x2="{c}" y2="{c + s}" stroke="#ddd"/>\n']
    for i, pts in enumerate(curves):
        pts = np.asarray(pts, dtype=complex)
        d = _path(c + s * pts.real, c - s * pts.imag, closed=True)
        col = colors[i % len(colors)]
        parts.append(f'<path d="{d}" fill="none" stroke="{col}" stroke-width="1.5"/>\n')
        if labels:
            parts.append(f'<text x="10" y="{20 + 16 * i}" fill="{col}" '
                         f'font-size="14">{labels[i]}</text>\n')
    Path(path).write_text(_svg("".join(parts)), encoding="utf-8")


def line_svg(path, x, y, atoms=(), title=""):
    """Density line plot; atoms drawn as vertical bars at their locations."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    pad = 0.08 * SIZE
    lo, hi = float(x.min()), float(x.max())
    ymax = float(np.max(y)) if y.size and np.max(y) > 0 else 1.0
    sx = lambda v: pad + (SIZE - 2 * pad) * (v - lo) / (hi - lo if hi > lo else 1.0)
    sy = lambda v: SIZE - pad - (SIZE - 2 * pad) * v / (1.05 * ymax)
    parts = [f'<rect x="{pad}" y="{pad}" width="{SIZE - 2 * pad}" height="{SIZE - 2 * pad}" '
             'fill="none" stroke="#999"/>\n',
             f'<path d="{_path(sx(x), sy(y))}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>\n']
    for loc, m in atoms:
        parts.append(f'<line x1="{sx(loc):.3f}" y1="{SIZE - pad}" x2="{sx(loc):.3f}" '
                     f'y2="{pad}" stroke="#d62728" stroke-dasharray="4 3"/>\n'
                     f'<text x="{sx(loc) + 4:.3f}" y="{pad + 14}" fill="#d62728" '
                     f'font-size="12">atom {m:.4g}</text>\n')
    if title:
        parts.append(f'<text x="{pad}" y="{pad - 10}" font-size="14">{title}</text>\n')
    Path(path).write_text(_svg("".join(parts)), encoding="utf-8")
