"""Minimal deterministic SVG line plots.

Emits standalone SVG with axes, ticks, and a legend; optional log10 scaling
per axis. Output bytes depend only on the input, so plots are diffable and
safe for byte-identical reproduction checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 66, 18, 34, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f", "#bcbd22"]


@dataclass(frozen=True)
class AxesMeta:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    xlim: tuple = None
    ylim: tuple = None


def _finite_points(xs, ys, xlog, ylog):
    pts = []
    for x, y in zip(xs, ys):
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        if (xlog and x <= 0) or (ylog and y <= 0):
            continue
        pts.append((x, y))
    return pts


def _axis_range(values, log, limits):
    if limits is not None:
        lo, hi = float(limits[0]), float(limits[1])
    else:
        lo, hi = min(values), max(values)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        elif not log:
            pad = 0.04 * (hi - lo)
            lo, hi = lo - pad, hi + pad
    if log:
        return math.log10(lo), math.log10(hi)
    return lo, hi


def _ticks(lo, hi, log):
    if log:
        first = math.ceil(lo - 1e-9)
        last = math.floor(hi + 1e-9)
        if first <= last:
            return [(float(t), f"1e{t}") for t in range(first, last + 1)]
        # fall through to linear ticks in log space
    ticks = []
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        label = f"{10 ** v:.2g}" if log else f"{v:.3g}"
        ticks.append((v, label))
    return ticks


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def emit_svg_plot(series, axes: AxesMeta, path) -> None:
    """Write one SVG line plot; `series` is a list of (label, xs, ys)."""
    if not series:
        raise ValueError("series list must be non-empty")
    prepared = []
    for label, xs, ys in series:
        if len(xs) != len(ys):
            raise ValueError(f"series {label!r} has mismatched x/y lengths")
        if len(xs) == 0:
            raise ValueError(f"series {label!r} is empty")
        prepared.append((str(label), _finite_points(xs, ys, axes.xlog, axes.ylog)))

    all_pts = [p for _, pts in prepared for p in pts]
    if all_pts:
        x_lo, x_hi = _axis_range([p[0] for p in all_pts], axes.xlog, axes.xlim)
        y_lo, y_hi = _axis_range([p[1] for p in all_pts], axes.ylog, axes.ylim)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        t = math.log10(v) if axes.xlog else v
        frac = 0.0 if x_hi == x_lo else (t - x_lo) / (x_hi - x_lo)
        return MARGIN_L + frac * plot_w

    def sy(v):
        t = math.log10(v) if axes.ylog else v
        frac = 0.0 if y_hi == y_lo else (t - y_lo) / (y_hi - y_lo)
        return MARGIN_T + (1.0 - frac) * plot_h

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif">')
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    if axes.title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" font-size="14" text-anchor="middle">'
                   f'{_esc(axes.title)}</text>')

    # frame, ticks, grid
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    x1, y1 = MARGIN_L + plot_w, MARGIN_T
    out.append(f'<rect x="{x0}" y="{y1}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="#000000" stroke-width="1"/>')
    for tv, label in _ticks(x_lo, x_hi, axes.xlog):
        px = MARGIN_L + (0.0 if x_hi == x_lo else (tv - x_lo) / (x_hi - x_lo)) * plot_w
        out.append(f'<line x1="{px:.2f}" y1="{y1}" x2="{px:.2f}" y2="{y0}" '
                   f'stroke="#dddddd" stroke-width="0.5"/>')
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" '
                   f'stroke="#000000" stroke-width="1"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 18}" font-size="11" text-anchor="middle">'
                   f'{_esc(label)}</text>')
    for tv, label in _ticks(y_lo, y_hi, axes.ylog):
        py = MARGIN_T + (1.0 - (0.0 if y_hi == y_lo else (tv - y_lo) / (y_hi - y_lo))) * plot_h
        out.append(f'<line x1="{x0}" y1="{py:.2f}" x2="{x1}" y2="{py:.2f}" '
                   f'stroke="#dddddd" stroke-width="0.5"/>')
        out.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" '
                   f'stroke="#000000" stroke-width="1"/>')
        out.append(f'<text x="{x0 - 8}" y="{py + 4:.2f}" font-size="11" text-anchor="end">'
                   f'{_esc(label)}</text>')
    if axes.xlabel:
        out.append(f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 12}" font-size="12" '
                   f'text-anchor="middle">{_esc(axes.xlabel)}</text>')
    if axes.ylabel:
        cy = MARGIN_T + plot_h / 2
        out.append(f'<text x="16" y="{cy:.1f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {cy:.1f})">{_esc(axes.ylabel)}</text>')

    # data
    for idx, (label, pts) in enumerate(prepared):
        color = PALETTE[idx % len(PALETTE)]
        if not pts:
            continue
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')

    # legend, input order
    lx = MARGIN_L + plot_w - 150
    ly = MARGIN_T + 10
    out.append(f'<rect x="{lx - 6}" y="{ly - 4}" width="150" height="{16 * len(prepared) + 8}" '
               f'fill="#ffffff" fill-opacity="0.85" stroke="#999999" stroke-width="0.5"/>')
    for idx, (label, _) in enumerate(prepared):
        color = PALETTE[idx % len(PALETTE)]
        yy = ly + 8 + 16 * idx
        out.append(f'<line x1="{lx}" y1="{yy}" x2="{lx + 22}" y2="{yy}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{yy + 4}" font-size="11">{_esc(label)}</text>')

    out.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
