"""Minimal dependency-free SVG emission for experiment output.

Only what the experiment plots need: polyline charts with axes and a colored
cell grid.  Output is a pure function of the inputs, so files are
byte-reproducible.
"""

from __future__ import annotations

import math

__all__ = ["line_chart", "color_grid"]

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 30, 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _scale(v, lo, hi, out_lo, out_hi):
    if hi == lo:
        return 0.5 * (out_lo + out_hi)
    return out_lo + (v - lo) * (out_hi - out_lo) / (hi - lo)


def _axes(x_lo, x_hi, y_lo, y_hi, x_label, y_label, title, log_y):
    parts = [
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{_W // 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{_H // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H // 2})">{y_label}</text>',
    ]
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        px = _scale(fx, x_lo, x_hi, _ML, _W - _MR)
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 16}" text-anchor="middle" '
                     f'font-size="10">{fx:.3g}</text>')
        fy = y_lo + (y_hi - y_lo) * i / 4
        py = _scale(fy, y_lo, y_hi, _H - _MB, _MT)
        label = f"{10 ** fy:.2g}" if log_y else f"{fy:.3g}"
        parts.append(f'<text x="{_ML - 6}" y="{_fmt(py + 3)}" text-anchor="end" '
                     f'font-size="10">{label}</text>')
    return parts


def line_chart(series: list[tuple[str, list[float], list[float]]], title: str,
               x_label: str, y_label: str, log_y: bool = False) -> str:
    """Polyline chart; series is a list of (label, xs, ys)."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if not log_y or y > 0.0]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs_all = [p[0] for p in pts]
    ys_all = [math.log10(p[1]) if log_y else p[1] for p in pts]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    parts = _axes(x_lo, x_hi, y_lo, y_hi, x_label, y_label, title, log_y)
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if log_y:
                if y <= 0.0:
                    continue
                y = math.log10(y)
            px = _scale(x, x_lo, x_hi, _ML, _W - _MR)
            py = _scale(y, y_lo, y_hi, _H - _MB, _MT)
            coords.append(f"{_fmt(px)},{_fmt(py)}")
        if coords:
            parts.append(f'<polyline points="{" ".join(coords)}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 14 + 14 * i
        parts.append(f'<line x1="{_W - _MR - 130}" y1="{ly}" x2="{_W - _MR - 110}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 104}" y="{ly + 4}" font-size="11">{label}</text>')
    body = "\n".join(parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">\n'
            f"{body}\n</svg>\n")


def _heat_color(t: float) -> str:
    # Two-stop blend, blue (low) to red (high).
    t = min(max(t, 0.0), 1.0)
    r = int(40 + t * (214 - 40))
    g = int(90 + t * (39 - 90))
    b = int(180 + t * (40 - 180))
    return f"#{r:02x}{g:02x}{b:02x}"


def color_grid(xs: list[float], ys: list[float], values: dict[tuple[float, float], float],
               title: str, x_label: str, y_label: str) -> str:
    """Colored cell grid; values maps (x, y) to a positive quantity shown on
    a log scale."""
    logs = [math.log10(v) for v in values.values() if v > 0.0 and math.isfinite(v)]
    lo = min(logs, default=0.0)
    hi = max(logs, default=1.0)
    cw = (_W - _ML - _MR) / len(xs)
    ch = (_H - _MT - _MB) / len(ys)
    parts = [f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W // 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
             f'<text x="{_W // 2}" y="{_H - 8}" text-anchor="middle" font-size="12">{x_label}</text>',
             f'<text x="14" y="{_H // 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {_H // 2})">{y_label}</text>']
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            v = values.get((x, y))
            if v is None:
                continue
            if v > 0.0 and math.isfinite(v):
                t = 0.5 if hi == lo else (math.log10(v) - lo) / (hi - lo)
                fill = _heat_color(t)
            else:
                fill = "#cccccc"
            px = _ML + i * cw
            py = _H - _MB - (j + 1) * ch
            parts.append(f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(cw)}" '
                         f'height="{_fmt(ch)}" fill="{fill}"/>')
    parts.append(f'<text x="{_ML}" y="{_H - _MB + 16}" font-size="10">{xs[0]:.3g}</text>')
    parts.append(f'<text x="{_W - _MR}" y="{_H - _MB + 16}" text-anchor="end" '
                 f'font-size="10">{xs[-1]:.3g}</text>')
    parts.append(f'<text x="{_W - _MR}" y="{_MT - 6}" text-anchor="end" font-size="10">'
                 f'scale: 1e{lo:.2g} .. 1e{hi:.2g}</text>')
    body = "\n".join(parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">\n'
            f"{body}\n</svg>\n")
