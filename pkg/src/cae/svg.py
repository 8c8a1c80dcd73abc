"""Minimal SVG output for heatmaps, trajectories, curves and policy arrows.

Grayscale is linear: value 0 is white, value 1 is black. Matrices are drawn
with row 0 at the bottom so that ``y`` grows upwards like in the environments.
"""

from __future__ import annotations

import numpy as np

CELL = 24


def _doc(width: float, height: float, body: list[str]) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">\n' + "\n".join(body) + "\n</svg>\n")


def gray(v: float) -> str:
    level = int(round(255 * (1.0 - min(max(float(v), 0.0), 1.0))))
    return f"rgb({level},{level},{level})"


def heatmap_svg(M: np.ndarray, cell: int = CELL, marks: dict | None = None) -> str:
    """``marks`` maps ``(col, row)`` to a short label drawn on top."""
    rows, cols = M.shape
    body = []
    for r in range(rows):
        for c in range(cols):
            v = M[r, c]
            y = (rows - 1 - r) * cell
            fill = "rgb(200,60,60)" if np.isnan(v) else gray(v)
            body.append(f'<rect x="{c * cell}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    for (c, r), label in (marks or {}).items():
        body.append(f'<text x="{c * cell + cell / 2}" y="{(rows - r) * cell - cell / 3}" font-size="{cell // 2}" '
                    f'text-anchor="middle" fill="rgb(220,120,0)">{label}</text>')
    return _doc(cols * cell, rows * cell, body)


def grid_map_body(env, cell: int = CELL) -> list[str]:
    body = []
    H = env.height
    open_cells = set(env.cells)
    for y in range(H):
        for x in range(env.width):
            sy = (H - 1 - y) * cell
            if (x, y) not in open_cells:
                fill = "rgb(60,60,60)"
            elif env.holes[env.index(x, y)]:
                fill = "rgb(30,60,140)"
            else:
                fill = "rgb(235,240,250)"
            body.append(f'<rect x="{x * cell}" y="{sy}" width="{cell}" height="{cell}" fill="{fill}" '
                        f'stroke="rgb(180,180,180)"/>')
    return body


def _grid_center(env, s, cell):
    x, y = env.cell(s)
    return x * cell + cell / 2, (env.height - 1 - y) * cell + cell / 2


def trajectory_svg(env, paths: list[list], cell: int = CELL, goal=None) -> str:
    """Polylines over a grid map (grid worlds) or the arena with walls (car)."""
    colors = ["rgb(220,40,40)", "rgb(40,160,40)", "rgb(40,80,220)", "rgb(200,120,0)"]
    if hasattr(env, "cells"):
        body = grid_map_body(env, cell)
        for i, path in enumerate(paths):
            pts = " ".join(f"{px:.1f},{py:.1f}" for px, py in (_grid_center(env, s, cell) for s in path))
            body.append(f'<polyline points="{pts}" fill="none" stroke="{colors[i % 4]}" stroke-width="3"/>')
        if goal is not None:
            gx, gy = _grid_center(env, goal, cell)
            body.append(f'<circle cx="{gx}" cy="{gy}" r="{cell / 4}" fill="rgb(240,200,0)"/>')
        return _doc(env.width * cell, env.height * cell, body)
    scale = 30.0
    size = env.size * scale
    body = [f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black"/>']
    for x1, y1, x2, y2 in env.walls:
        body.append(f'<line x1="{x1 * scale}" y1="{size - y1 * scale}" x2="{x2 * scale}" y2="{size - y2 * scale}" '
                    f'stroke="black" stroke-width="4"/>')
    for i, path in enumerate(paths):
        pts = " ".join(f"{p[0] * scale:.1f},{size - p[1] * scale:.1f}" for p in path)
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colors[i % 4]}" stroke-width="2"/>')
    if goal is not None:
        r = env.goal_radius * scale
        body.append(f'<rect x="{goal[0] * scale - r}" y="{size - goal[1] * scale - r}" width="{2 * r}" '
                    f'height="{2 * r}" fill="none" stroke="rgb(240,160,0)" stroke-width="2"/>')
    return _doc(size, size, body)


def curve_svg(xs, ys, width: int = 480, height: int = 240, label: str = "") -> str:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    pad = 30
    body = [f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - 5}" y2="{height - pad}" stroke="black"/>',
            f'<line x1="{pad}" y1="5" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    if len(xs):
        lo, hi = float(np.nanmin(ys)), float(np.nanmax(ys))
        hi = hi if hi > lo else lo + 1.0
        span = xs.max() - xs.min() or 1.0
        px = pad + (xs - xs.min()) / span * (width - pad - 5)
        py = (height - pad) - (ys - lo) / (hi - lo) * (height - pad - 5)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py) if np.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="rgb(40,80,220)" stroke-width="2"/>')
        body.append(f'<text x="{pad + 4}" y="14" font-size="11">{hi:.3g}</text>')
        body.append(f'<text x="{pad + 4}" y="{height - pad - 4}" font-size="11">{lo:.3g}</text>')
    if label:
        body.append(f'<text x="{width / 2}" y="{height - 8}" font-size="12" text-anchor="middle">{label}</text>')
    return _doc(width, height, body)


ARROWS = {(0, 1): "↑", (1, 0): "→", (0, -1): "↓", (-1, 0): "←"}


def arrows_svg(env, actions: dict, cell: int = CELL, goal=None) -> str:
    """Frozen-lake style policy plot; ``actions`` maps state -> action index."""
    body = grid_map_body(env, cell)
    for s, a in actions.items():
        cx, cy = _grid_center(env, s, cell)
        glyph = ARROWS.get(tuple(env._moves[a]), "?")
        body.append(f'<text x="{cx}" y="{cy + cell / 4}" font-size="{cell * 0.7:.0f}" text-anchor="middle">'
                    f'{glyph}</text>')
    if goal is not None:
        gx, gy = _grid_center(env, goal, cell)
        body.append(f'<circle cx="{gx}" cy="{gy}" r="{cell / 3}" fill="none" stroke="rgb(240,160,0)" '
                    f'stroke-width="3"/>')
    return _doc(env.width * cell, env.height * cell, body)
