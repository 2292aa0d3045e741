"""Minimal static SVG line and bar charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 60


def _fmt(v):
    return f"{v:.4g}"


def _scale(lo, hi, a, b):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, xlabel, ylabel):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{(LEFT + W - RIGHT) / 2:.1f}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{(TOP + H - BOTTOM) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 15 {(TOP + H - BOTTOM) / 2:.1f})">{escape(ylabel)}</text>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
    ]


def _yticks(parts, sy, lo, hi):
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        y = sy(v)
        parts.append(f'<line x1="{LEFT - 4}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')


def _legend(parts, names):
    for i, name in enumerate(names):
        y = TOP + 10 + 16 * i
        c = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{W - RIGHT + 12}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        parts.append(f'<text x="{W - RIGHT + 26}" y="{y + 1}">{escape(str(name))}</text>')


def line_plot(series, title="", xlabel="", ylabel="", logx=False):
    """``series`` maps a label to ``(xs, ys)``."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    xs = [tx(x) for xy in series.values() for x in xy[0]]
    ys = [y for xy in series.values() for y in xy[1]]
    if not xs:
        xs, ys = [0.0], [0.0]
    ylo, yhi = min(min(ys), 0.0), max(max(ys), 0.0)
    sx = _scale(min(xs), max(xs), LEFT + 10, W - RIGHT - 10)
    sy = _scale(ylo, yhi, H - BOTTOM, TOP)
    parts = _frame(title, xlabel, ylabel)
    _yticks(parts, sy, ylo, yhi)
    zero = sy(0.0)
    parts.append(f'<line x1="{LEFT}" y1="{zero:.1f}" x2="{W - RIGHT}" y2="{zero:.1f}" '
                 'stroke="#999" stroke-dasharray="4 3"/>')
    for x in sorted({x for xy in series.values() for x in xy[0]}):
        px = sx(tx(x))
        parts.append(f'<text x="{px:.1f}" y="{H - BOTTOM + 16}" text-anchor="middle">{_fmt(x)}</text>')
    for i, (name, (xv, yv)) in enumerate(series.items()):
        c = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(tx(x)):.1f},{sy(y):.1f}" for x, y in zip(xv, yv))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        for x, y in zip(xv, yv):
            parts.append(f'<circle cx="{sx(tx(x)):.1f}" cy="{sy(y):.1f}" r="3" fill="{c}"/>')
    _legend(parts, series)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def stacked_bar_plot(categories, stacks, title="", ylabel="%"):
    """``stacks`` maps a segment label to one value per category."""
    n = max(len(categories), 1)
    totals = [sum(v[i] for v in stacks.values()) for i in range(len(categories))] or [1.0]
    sy = _scale(0.0, max(max(totals), 1e-12), H - BOTTOM, TOP)
    parts = _frame(title, "", ylabel)
    _yticks(parts, sy, 0.0, max(totals))
    slot = (W - RIGHT - LEFT) / n
    for i, cat in enumerate(categories):
        x = LEFT + slot * i + slot * 0.15
        base = 0.0
        for j, vals in enumerate(stacks.values()):
            v = vals[i]
            y0, y1 = sy(base), sy(base + v)
            c = PALETTE[j % len(PALETTE)]
            parts.append(f'<rect x="{x:.1f}" y="{y1:.1f}" width="{slot * 0.7:.1f}" '
                         f'height="{y0 - y1:.1f}" fill="{c}"/>')
            base += v
        parts.append(f'<text x="{x + slot * 0.35:.1f}" y="{H - BOTTOM + 16}" '
                     f'text-anchor="middle">{escape(str(cat))}</text>')
    _legend(parts, stacks)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
