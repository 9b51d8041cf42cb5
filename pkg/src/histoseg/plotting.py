"""Minimal hand-rolled SVG plots: histogram, model curves, threshold lines.

SVG output is plain text assembled with fixed float formatting, so
identical inputs always produce byte-identical files.
"""

import numpy as np

_WIDTH = 800
_HEIGHT = 480
_MARGIN_LEFT = 60
_MARGIN_RIGHT = 20
_MARGIN_TOP = 30
_MARGIN_BOTTOM = 45

_CURVE_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd")


def _fmt(value):
    return f"{value:.2f}"


class _Frame:
    def __init__(self, x_lo, x_hi, y_hi):
        self.x_lo = x_lo
        self.x_hi = x_hi
        self.y_hi = y_hi if y_hi > 0 else 1.0

    def x(self, value):
        frac = (value - self.x_lo) / (self.x_hi - self.x_lo)
        return _MARGIN_LEFT + frac * (_WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT)

    def y(self, value):
        frac = value / self.y_hi
        return _HEIGHT - _MARGIN_BOTTOM - frac * (_HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM)


def _polyline(frame, xs, ys, color, width="1.5"):
    points = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}" for x, y in zip(xs, ys))
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
        f'points="{points}"/>'
    )


def render_threshold_svg(path, hist, curves, thresholds, title=""):
    """Write an SVG of the histogram (step polyline), optional labeled model
    curves, and vertical dashed lines at the thresholds.

    ``curves`` is a sequence of ``(label, xs, ys)`` triples.
    """
    x_lo = float(hist.centers[0] - 0.5 * hist.bin_width)
    x_hi = float(hist.centers[-1] + 0.5 * hist.bin_width)
    y_hi = float(hist.densities.max())
    for _, _, ys in curves:
        if len(ys):
            y_hi = max(y_hi, float(np.max(ys)))
    frame = _Frame(x_lo, x_hi, 1.05 * y_hi)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )

    # Axes.
    x0, y0 = _fmt(frame.x(x_lo)), _fmt(frame.y(0.0))
    x1, y1 = _fmt(frame.x(x_hi)), _fmt(frame.y(frame.y_hi))
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x_val = x_lo + frac * (x_hi - x_lo)
        parts.append(
            f'<text x="{_fmt(frame.x(x_val))}" y="{_HEIGHT - _MARGIN_BOTTOM + 18}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{x_val:.4g}</text>"
        )

    # Histogram as a step outline.
    edges = np.concatenate(
        [hist.centers - 0.5 * hist.bin_width, [hist.centers[-1] + 0.5 * hist.bin_width]]
    )
    xs = np.repeat(edges, 2)[1:-1]
    ys = np.repeat(hist.densities, 2)
    parts.append(_polyline(frame, xs, ys, "#555555", width="1.0"))

    for k, (label, cx, cy) in enumerate(curves):
        color = _CURVE_COLORS[k % len(_CURVE_COLORS)]
        parts.append(_polyline(frame, cx, cy, color))
        parts.append(
            f'<text x="{_WIDTH - _MARGIN_RIGHT - 150}" y="{_MARGIN_TOP + 16 * (k + 1)}" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{label}</text>'
        )

    for tau in thresholds:
        x_px = _fmt(frame.x(float(tau)))
        parts.append(
            f'<line x1="{x_px}" y1="{_fmt(frame.y(0.0))}" x2="{x_px}" '
            f'y2="{_fmt(frame.y(frame.y_hi))}" stroke="#888888" '
            'stroke-dasharray="6,4" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x_px}" y="{_MARGIN_TOP - 8}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#555555">{float(tau):.5g}</text>'
        )

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(parts) + "\n")
