"""Deterministic static SVG figures of a run: path, velocity profile and position clouds.

Output depends only on the inputs: coordinates are printed with fixed
precision and elements are emitted in input order, so identical logs give
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .planner import Scenario

WIDTH, HEIGHT = 800, 400
MARGIN = 50
MAX_POLYLINE_POINTS = 2000

COLORS = {
    "inflated": "#f4a582",
    "obstacle": "#b2182b",
    "path": "#1b7837",
    "trajectory": "#2166ac",
    "reference": "#999999",
    "cloud": "#d6604d",
    "lookahead": "#fddbc7",
    "corridor": "#e0f3f8",
    "axis": "#333333",
}


def _fmt(value: float) -> str:
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(k * mag for k in (1, 2, 2.5, 5, 10) if k * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(round(value, 10))
        value += step
    return ticks


@dataclass(frozen=True)
class Frame:
    """Affine map from data coordinates to the pixel canvas (y up)."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    width: int = WIDTH
    height: int = HEIGHT
    equal_aspect: bool = False

    @classmethod
    def around(cls, xs, ys, pad: float = 0.05, equal_aspect=False, width=WIDTH, height=HEIGHT) -> "Frame":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size == 0 or ys.size == 0:
            return cls(0.0, 1.0, 0.0, 1.0, width, height, equal_aspect)
        x_lo, x_hi, y_lo, y_hi = xs.min(), xs.max(), ys.min(), ys.max()
        dx = max(x_hi - x_lo, 1e-9)
        dy = max(y_hi - y_lo, 1e-9)
        x_lo, x_hi = x_lo - pad * dx, x_hi + pad * dx
        y_lo, y_hi = y_lo - pad * dy, y_hi + pad * dy
        if equal_aspect:
            sx = (x_hi - x_lo) / (width - 2 * MARGIN)
            sy = (y_hi - y_lo) / (height - 2 * MARGIN)
            s = max(sx, sy)
            cx, cy = (x_lo + x_hi) / 2, (y_lo + y_hi) / 2
            half_x = s * (width - 2 * MARGIN) / 2
            half_y = s * (height - 2 * MARGIN) / 2
            x_lo, x_hi, y_lo, y_hi = cx - half_x, cx + half_x, cy - half_y, cy + half_y
        return cls(float(x_lo), float(x_hi), float(y_lo), float(y_hi), width, height, equal_aspect)

    @property
    def sx(self) -> float:
        return (self.width - 2 * MARGIN) / (self.x_hi - self.x_lo)

    @property
    def sy(self) -> float:
        return (self.height - 2 * MARGIN) / (self.y_hi - self.y_lo)

    def px(self, x) -> np.ndarray:
        return MARGIN + (np.asarray(x, dtype=float) - self.x_lo) * self.sx

    def py(self, y) -> np.ndarray:
        return self.height - MARGIN - (np.asarray(y, dtype=float) - self.y_lo) * self.sy


class Svg:
    def __init__(self, frame: Frame, title: str):
        self.frame = frame
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width}" height="{frame.height}" '
            f'viewBox="0 0 {frame.width} {frame.height}">',
            f"<title>{title}</title>",
            f'<rect x="0" y="0" width="{frame.width}" height="{frame.height}" fill="white"/>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def axes(self, x_label: str, y_label: str) -> None:
        f = self.frame
        x0, x1 = MARGIN, f.width - MARGIN
        y0, y1 = f.height - MARGIN, MARGIN
        c = COLORS["axis"]
        self.add(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="{c}" stroke-width="1"/>')
        self.add(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="{c}" stroke-width="1"/>')
        for t in nice_ticks(f.x_lo, f.x_hi):
            x = _fmt(float(f.px(t)))
            self.add(f'<line x1="{x}" y1="{y0}" x2="{x}" y2="{y0 + 5}" stroke="{c}"/>')
            self.add(f'<text x="{x}" y="{y0 + 18}" font-size="11" text-anchor="middle">{_fmt(t)}</text>')
        for t in nice_ticks(f.y_lo, f.y_hi):
            y = _fmt(float(f.py(t)))
            self.add(f'<line x1="{x0 - 5}" y1="{y}" x2="{x0}" y2="{y}" stroke="{c}"/>')
            self.add(f'<text x="{x0 - 8}" y="{y}" font-size="11" text-anchor="end" dominant-baseline="middle">{_fmt(t)}</text>')
        self.add(f'<text x="{(x0 + x1) / 2:g}" y="{f.height - 10}" font-size="12" text-anchor="middle">{x_label}</text>')
        self.add(
            f'<text x="14" y="{(y0 + y1) / 2:g}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 14 {(y0 + y1) / 2:g})">{y_label}</text>'
        )

    def polyline(self, xs, ys, color: str, width: float = 1.5, dash: str | None = None) -> None:
        xs, ys = _decimate(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.frame.px(xs), self.frame.py(ys)))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width:g}"{dash_attr}/>')

    def circle(self, cx: float, cy: float, r: float, color: str, opacity: float = 0.4) -> None:
        f = self.frame
        self.add(
            f'<circle cx="{_fmt(float(f.px(cx)))}" cy="{_fmt(float(f.py(cy)))}" r="{_fmt(r * f.sx)}" '
            f'fill="{color}" fill-opacity="{opacity:g}" stroke="{color}"/>'
        )

    def ellipse(self, cx: float, cy: float, r: float, color: str) -> None:
        f = self.frame
        self.add(
            f'<ellipse cx="{_fmt(float(f.px(cx)))}" cy="{_fmt(float(f.py(cy)))}" rx="{_fmt(r * f.sx)}" '
            f'ry="{_fmt(r * f.sy)}" fill="{color}" fill-opacity="0.8" stroke="none"/>'
        )

    def dots(self, points, color: str, size: float = 1.5, opacity: float = 0.6) -> None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return
        px, py = self.frame.px(pts[:, 0]), self.frame.py(pts[:, 1])
        d = " ".join(f"M{_fmt(a)} {_fmt(b)}h{_fmt(size)}v{_fmt(size)}h-{_fmt(size)}z" for a, b in zip(px, py))
        self.add(f'<path d="{d}" fill="{color}" fill-opacity="{opacity:g}" stroke="none"/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>", ""])


def _decimate(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = xs.size
    if n <= MAX_POLYLINE_POINTS:
        return xs, ys
    idx = np.unique(np.concatenate([np.linspace(0, n - 1, MAX_POLYLINE_POINTS).round().astype(int), [n - 1]]))
    return xs[idx], ys[idx]


def _positions(states) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        return np.empty((0, 2))
    return states[:, 2:4]


def path_svg(scenario: Scenario, path_points, states, clouds=()) -> str:
    """Inflated obstacles (circles), physical discs (ellipses), the desired path,
    the driven trajectory and the start-goal reference (three polylines), and
    sampled position clouds. An empty trajectory gives axes only."""
    pos = _positions(states)
    if len(pos) == 0:
        svg = Svg(Frame(0.0, 1.0, 0.0, 1.0, equal_aspect=True), "path")
        svg.axes("x [m]", "y [m]")
        return svg.render()
    path_points = np.asarray(path_points, dtype=float).reshape(-1, 2)
    xs = [pos[:, 0], path_points[:, 0], [scenario.start[0], scenario.goal[0]]]
    ys = [pos[:, 1], path_points[:, 1], [scenario.start[1], scenario.goal[1]]]
    for o, r in zip(scenario.obstacles, scenario.inflated_radii):
        xs.append([o.center[0] - r, o.center[0] + r])
        ys.append([o.center[1] - r, o.center[1] + r])
    frame = Frame.around(np.concatenate(xs), np.concatenate(ys), equal_aspect=True)
    svg = Svg(frame, "path")
    svg.axes("x [m]", "y [m]")
    for o, r in zip(scenario.obstacles, scenario.inflated_radii):
        svg.circle(o.center[0], o.center[1], float(r), COLORS["inflated"], 0.3)
    for o in scenario.obstacles:
        svg.ellipse(o.center[0], o.center[1], o.radius, COLORS["obstacle"])
    for cloud in clouds:
        svg.dots(cloud, COLORS["cloud"], 1.2, 0.5)
    svg.polyline([scenario.start[0], scenario.goal[0]], [scenario.start[1], scenario.goal[1]],
                 COLORS["reference"], 1.0, "4 4")
    svg.polyline(path_points[:, 0], path_points[:, 1], COLORS["path"], 2.0)
    svg.polyline(pos[:, 0], pos[:, 1], COLORS["trajectory"], 1.5)
    return svg.render()


def velocity_svg(t, v, corridor: tuple[float, float]) -> str:
    """Speed over time with the admissible corridor shaded. Empty input gives axes only."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = corridor
    if t.size == 0:
        svg = Svg(Frame(0.0, 1.0, lo, hi), "velocity")
        svg.axes("t [s]", "v [m/s]")
        return svg.render()
    frame = Frame.around([t.min(), t.max()], [min(lo, v.min()), max(hi, v.max())])
    svg = Svg(frame, "velocity")
    x0, x1 = frame.px(t.min()), frame.px(t.max())
    y_hi, y_lo = frame.py(hi), frame.py(lo)
    svg.add(
        f'<rect x="{_fmt(float(x0))}" y="{_fmt(float(y_hi))}" width="{_fmt(float(x1 - x0))}" '
        f'height="{_fmt(float(y_lo - y_hi))}" fill="{COLORS["corridor"]}"/>'
    )
    svg.axes("t [s]", "v [m/s]")
    svg.polyline(t, v, COLORS["trajectory"], 1.5)
    return svg.render()


def clouds_svg(states, snapshots) -> str:
    """Unactuated and lookahead position clouds at sampled outer iterations over the trajectory."""
    pos = _positions(states)
    look = [np.asarray(s["lookahead"], dtype=float).reshape(-1, 2) for s in snapshots]
    single = [np.asarray(s["unactuated"], dtype=float).reshape(-1, 2) for s in snapshots]
    stacked = [pos] + look + single
    allpts = np.vstack([p for p in stacked if len(p)]) if any(len(p) for p in stacked) else np.empty((0, 2))
    if len(pos) == 0:
        svg = Svg(Frame(0.0, 1.0, 0.0, 1.0, equal_aspect=True), "clouds")
        svg.axes("x [m]", "y [m]")
        return svg.render()
    svg = Svg(Frame.around(allpts[:, 0], allpts[:, 1], equal_aspect=True), "clouds")
    svg.axes("x [m]", "y [m]")
    for pts in look:
        svg.dots(pts, COLORS["lookahead"], 1.2, 0.8)
    for pts in single:
        svg.dots(pts, COLORS["cloud"], 1.2, 0.8)
    svg.polyline(pos[:, 0], pos[:, 1], COLORS["trajectory"], 1.0)
    return svg.render()
