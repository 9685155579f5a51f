"""Minimal static SVG charts: line charts, scatter plots, scree plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf"]


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, float) - lo) / span * (b - a)


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _frame(title, xlabel, ylabel, xlim, ylim):
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    sx, sy = _scale(*xlim, x0, x1), _scale(*ylim, y0, y1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for t in _ticks(*xlim):
        x = float(sx(t))
        out.append(f'<line x1="{x:.1f}" y1="{y0}" x2="{x:.1f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{y0 + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(*ylim):
        y = float(sy(t))
        out.append(f'<line x1="{x0 - 5}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>'
    )
    return out, sx, sy


def _limits(values, pad=0.05):
    v = np.asarray(values, float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return lo - 0.5, hi + 0.5
    d = (hi - lo) * pad
    return lo - d, hi + d


def _legend(out, names):
    x = WIDTH - MARGIN["right"] + 15
    for i, name in enumerate(names):
        y = MARGIN["top"] + 18 * i + 10
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{x + 18}" y="{y + 2}">{escape(str(name))}</text>')


def line_chart(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """``series`` maps a legend name to ``(xs, ys)``."""
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ys = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    out, sx, sy = _frame(title, xlabel, ylabel, _limits(xs, 0.0), _limits(ys))
    for i, (x, y) in enumerate(series.values()):
        color = PALETTE[i % len(PALETTE)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(y)
        pts = " ".join(f"{float(a):.2f},{float(b):.2f}" for a, b in zip(sx(x[ok]), sy(y[ok])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(sx(x[ok]), sy(y[ok])):
            out.append(f'<circle cx="{float(a):.2f}" cy="{float(b):.2f}" r="3" fill="{color}"/>')
    _legend(out, list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter(X: np.ndarray, labels=None, title: str = "") -> str:
    X = np.asarray(X, float)
    if X.shape[1] == 1:
        X = np.column_stack([X[:, 0], np.zeros(len(X))])
    out, sx, sy = _frame(title, "dim 1", "dim 2", _limits(X[:, 0]), _limits(X[:, 1]))
    classes = [None] if labels is None else sorted(set(int(v) for v in labels))
    for i, c in enumerate(classes):
        color = PALETTE[i % len(PALETTE)]
        pts = X if c is None else X[np.asarray(labels) == c]
        for a, b in zip(sx(pts[:, 0]), sy(pts[:, 1])):
            out.append(f'<circle cx="{float(a):.2f}" cy="{float(b):.2f}" r="2.5" fill="{color}" fill-opacity="0.7"/>')
    if labels is not None:
        _legend(out, [f"class {c}" for c in classes])
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scree_chart(values, title: str = "Scree plot") -> str:
    idx = np.arange(1, len(values) + 1)
    return line_chart({"eigenvalue": (idx, values)}, title, "component", "eigenvalue")
