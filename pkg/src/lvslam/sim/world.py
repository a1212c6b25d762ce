"""Synthetic worlds: line segments, rectangular surfaces, point landmarks.

Presets mirror three scene archetypes: a dense small `room`, a long
regular `hall`, and a sparse outdoor `gate`. Generation is a pure function
of (preset, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UnknownPreset


@dataclass
class World:
    """Desk-scale scene description in the world frame (z up)."""

    segments: np.ndarray               # (L, 2, 3) line segment endpoints
    planes: np.ndarray                 # (P, 4, 3) rectangle corners (ccw)
    points: np.ndarray                 # (N, 3) point landmarks
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0, 1]))
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 2, 3)
        self.planes = np.asarray(self.planes, dtype=float).reshape(-1, 4, 3)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.gravity = np.asarray(self.gravity, dtype=float)

    @staticmethod
    def empty() -> "World":
        return World(np.zeros((0, 2, 3)), np.zeros((0, 4, 3)),
                     np.zeros((0, 3)), name="empty")


def _rect(c0, c1, c2, c3):
    return np.array([c0, c1, c2, c3], dtype=float)


def _room_box(x0, x1, y0, y1, z0, z1, ceiling=True):
    """Axis-aligned walls, floor, optional ceiling of a box interior."""
    quads = [
        _rect((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)),
        _rect((x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)),
        _rect((x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)),
        _rect((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)),
        _rect((x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)),
    ]
    if ceiling:
        quads.append(_rect((x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)))
    return quads


def _wall_frame_segments(x0, x1, y, z0, z1, n, rng):
    """Door/window style rectangles drawn as segments on a y=const wall."""
    segments = []
    for _ in range(n):
        cx = rng.uniform(x0 + 0.5, x1 - 0.8)
        w = rng.uniform(0.35, 0.8)
        zb = rng.uniform(z0 + 0.1, z0 + 0.5)
        h = rng.uniform(0.7, min(1.6, z1 - zb - 0.1))
        segments += [
            [(cx, y, zb), (cx, y, zb + h)],
            [(cx + w, y, zb), (cx + w, y, zb + h)],
            [(cx, y, zb + h), (cx + w, y, zb + h)],
            [(cx, y, zb), (cx + w, y, zb)],
        ]
    return segments


def _grid_points_on_wall(x0, x1, y, z0, z1, nx, nz, jitter, rng):
    xs = np.linspace(x0, x1, nx)
    zs = np.linspace(z0, z1, nz)
    gx, gz = np.meshgrid(xs, zs)
    pts = np.column_stack([gx.ravel(), np.full(gx.size, float(y)), gz.ravel()])
    return pts + rng.normal(scale=jitter, size=pts.shape)


def _x_wall_frames(x, y0, y1, z0, z1, n, rng):
    """Door/window rectangles drawn as segments on an x=const wall."""
    segments = []
    for _ in range(n):
        cy = rng.uniform(y0 + 0.5, y1 - 0.9)
        w = rng.uniform(0.4, 0.8)
        zb = rng.uniform(z0 + 0.1, z0 + 0.5)
        h = rng.uniform(0.8, min(1.6, z1 - zb - 0.1))
        segments += [
            [(x, cy, zb), (x, cy, zb + h)],
            [(x, cy + w, zb), (x, cy + w, zb + h)],
            [(x, cy, zb + h), (x, cy + w, zb + h)],
            [(x, cy, zb), (x, cy + w, zb)],
        ]
    return segments


def _room(seed):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1, z0, z1 = -3.0, 3.0, -2.5, 2.5, 0.0, 2.6
    planes = _room_box(x0, x1, y0, y1, z0, z1)
    segments = []
    segments += _wall_frame_segments(x0, x1, y1, z0, z1, 3, rng)
    segments += _wall_frame_segments(x0, x1, y0, z0, z1, 3, rng)
    segments += _x_wall_frames(x1, y0, y1, z0, z1, 2, rng)
    segments += _x_wall_frames(x0, y0, y1, z0, z1, 2, rng)
    # vertical frames on the side walls
    for y in np.linspace(y0 + 0.8, y1 - 0.8, 4):
        segments.append([(x1, y, 0.2), (x1, y, 2.2)])
        segments.append([(x0, y, 0.3), (x0, y, 2.3)])
    # two free-standing poles
    for _ in range(2):
        px, py = rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0)
        segments.append([(px, py, 0.0), (px, py, 2.0)])
    # corner-style point landmarks on every wall plus the floor
    points = np.vstack([
        _grid_points_on_wall(x0 + 0.3, x1 - 0.3, y1, 0.4, 2.3, 9, 5, 0.05, rng),
        _grid_points_on_wall(x0 + 0.3, x1 - 0.3, y0, 0.4, 2.3, 9, 5, 0.05, rng),
        _wall_points_x(x1, y0 + 0.3, y1 - 0.3, 0.4, 2.3, 9, 5, 0.05, rng),
        _wall_points_x(x0, y0 + 0.3, y1 - 0.3, 0.4, 2.3, 9, 5, 0.05, rng),
        _grid_points_on_wall(x0 + 0.4, x1 - 0.4, 0.0, 0.0, 0.0, 6, 1, 0.0, rng)
        + [0, 0, 0.001],
    ])
    return World(np.array(segments), np.array(planes), points,
                 seed=seed, name="room")


def _wall_points_x(x, ylo, yhi, z0, z1, ny, nz, jitter, rng):
    ys = np.linspace(ylo, yhi, ny)
    zs = np.linspace(z0, z1, nz)
    gy, gz = np.meshgrid(ys, zs)
    pts = np.column_stack([np.full(gy.size, float(x)), gy.ravel(), gz.ravel()])
    return pts + rng.normal(scale=jitter, size=pts.shape)


def _hall(seed):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1, z0, z1 = -2.0, 22.0, -3.0, 3.0, 0.0, 3.5
    planes = _room_box(x0, x1, y0, y1, z0, z1)
    segments = []
    # regular column edges and ceiling beams along the corridor
    for cx in np.arange(0.0, 20.0 + 1e-9, 2.5):
        for y in (y0, y1):
            segments.append([(cx, y, 0.0), (cx, y, z1)])
        segments.append([(cx, y0, z1 - 0.2), (cx, y1, z1 - 0.2)])
    for y in (y0 + 0.01, y1 - 0.01):
        segments.append([(x0, y, 1.0), (x1, y, 1.0)])  # handrail lines
    points = np.vstack([
        _grid_points_on_wall(0.0, 20.0, y1, 0.5, 3.0, 24, 4, 0.04, rng),
        _grid_points_on_wall(0.0, 20.0, y0, 0.5, 3.0, 24, 4, 0.04, rng),
    ])
    return World(np.array(segments), np.array(planes), points,
                 seed=seed, name="hall")


def _gate(seed):
    rng = np.random.default_rng(seed)
    ground = _rect((-5, -8, 0), (30, -8, 0), (30, 8, 0), (-5, 8, 0))
    back_wall = _rect((25, -6, 0), (25, 6, 0), (25, 6, 5), (25, -6, 5))
    planes = [ground, back_wall]
    segments = []
    # gate: two pillars and a lintel, plus sparse distant poles
    for y in (-2.5, 2.5):
        segments.append([(10.0, y, 0.0), (10.0, y, 4.0)])
        planes.append(_rect((9.9, y - 0.15, 0), (10.1, y - 0.15, 0),
                            (10.1, y + 0.15, 4.0), (9.9, y + 0.15, 4.0)))
    segments.append([(10.0, -2.5, 4.0), (10.0, 2.5, 4.0)])
    for _ in range(6):
        px = rng.uniform(14, 24)
        py = rng.uniform(-7, 7)
        segments.append([(px, py, 0.0), (px, py, rng.uniform(2.5, 4.5))])
    points = np.column_stack([
        rng.uniform(8, 25, 28), rng.uniform(-6, 6, 28), rng.uniform(0.3, 4.5, 28)])
    return World(np.array(segments), np.array(planes), points,
                 seed=seed, name="gate")


_PRESETS = {"room": _room, "hall": _hall, "gate": _gate}


def generate_scene(preset: str, seed: int = 0) -> World:
    """Deterministic world for (preset, seed); presets: room, hall, gate."""
    if preset == "empty":
        return World.empty()
    if preset not in _PRESETS:
        raise UnknownPreset(f"unknown scene preset {preset!r}")
    return _PRESETS[preset](seed)
