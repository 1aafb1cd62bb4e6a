"""Learning curves as standalone SVG, byte-stable for a given input.

Each trial is drawn in grey as its trailing-k episode mean against
cumulative frames. The red line averages the trials on a shared grid of
frame counts, where each trial holds its last reported value; it starts
once every trial has finished an episode.
"""

from __future__ import annotations

import bisect
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

from .protocol import TrialRecord, trailing_mean

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
GRID_POINTS = 200


def trial_curve(trial: TrialRecord, k: int) -> List[Tuple[int, float]]:
    scores = trial.scores
    return [(ep.cum_frames, trailing_mean(scores, ep.index, k)) for ep in trial.episodes]


def mean_curve(curves: Sequence[Sequence[Tuple[int, float]]], points: int = GRID_POINTS):
    """Cross-trial mean on an even frame grid, starting once every trial has reported."""
    curves = [c for c in curves if c]
    if not curves:
        return []
    x_max = max(c[-1][0] for c in curves)
    x_min = max(c[0][0] for c in curves)
    grid = sorted({x_min + (x_max - x_min) * i // max(points - 1, 1) for i in range(points)})
    xs_per = [[x for x, _ in c] for c in curves]
    out = []
    for x in grid:
        vals = [c[bisect.bisect_right(xs, x) - 1][1] for c, xs in zip(curves, xs_per)]
        out.append((x, sum(vals) / len(vals)))
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / n
    return [lo + step * i for i in range(n + 1)]


def emit_curves(records: Sequence[TrialRecord], k: int, title: str = "") -> str:
    """SVG learning-curve document for the trials of one (agent, game) cell."""
    if not records:
        raise ValueError("emit_curves needs at least one trial")
    ordered = sorted(records, key=lambda r: r.trial)
    curves = [trial_curve(r, k) for r in ordered]
    mean = mean_curve(curves)
    points = [p for c in curves for p in c]
    x_hi = max((x for x, _ in points), default=1) or 1
    y_values = [y for _, y in points] or [0.0]
    y_lo, y_hi = min(y_values), max(y_values)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + plot_w * x / x_hi

    def sy(y):
        return TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    def polyline(curve, colour, width, opacity):
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in curve)
        return (f'<polyline fill="none" stroke="{colour}" stroke-width="{width}" '
                f'stroke-opacity="{opacity}" points="{pts}"/>')

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
    ]
    for x in _nice_ticks(0, x_hi):
        lines.append(f'<text x="{_fmt(sx(x))}" y="{TOP + plot_h + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{int(round(x))}</text>')
    for y in _nice_ticks(y_lo, y_hi):
        lines.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(y) + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{_fmt(y)}</text>')
    lines.append(f'<text x="{LEFT + plot_w // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">frames</text>')
    lines.append(f'<text x="16" y="{TOP + plot_h // 2}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 {TOP + plot_h // 2})">'
                 f'mean score of last {k} episodes</text>')
    for curve in curves:
        if curve:
            lines.append(polyline(curve, "grey", 1, 0.6))
    if mean:
        lines.append(polyline(mean, "red", 2, 1))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
