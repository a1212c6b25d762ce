"""2D line segments and detection front ends.

Two observation modes: synthetic frames pass their (already noise-perturbed)
projected segments straight through a length filter; raw images go through a
minimal gradient-magnitude detector (connected elongated components), which
stands in for a production segment detector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass
class Segment2D:
    """Pixel-space segment; endpoints stored as (u, v)."""

    xs: np.ndarray                 # (2,) start endpoint
    xe: np.ndarray                 # (2,) end endpoint
    descriptor_id: int = -1       # correspondence id used for matching

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float).reshape(2)
        self.xe = np.asarray(self.xe, dtype=float).reshape(2)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.xe - self.xs))

    @property
    def xs_h(self) -> np.ndarray:
        return np.array([self.xs[0], self.xs[1], 1.0])

    @property
    def xe_h(self) -> np.ndarray:
        return np.array([self.xe[0], self.xe[1], 1.0])

    def image_line(self) -> np.ndarray:
        """Homogeneous line through the endpoints: l = xs x xe."""
        return np.cross(self.xs_h, self.xe_h)


def detect_lines(observation, min_length: float = 30.0,
                 grad_threshold: float = 0.1) -> list[Segment2D]:
    """Extract 2D segments from a frame observation.

    `observation` is either an object with a `.segments` list (synthetic
    frames, returned filtered by length) or a 2D intensity array run through
    the gradient detector.
    """
    if hasattr(observation, "segments"):
        return [s for s in observation.segments if s.length >= min_length]
    image = np.asarray(observation, dtype=float)
    if image.ndim != 2:
        raise ValueError("image observations must be 2D intensity arrays")
    return _detect_gradient_segments(image, min_length, grad_threshold)


def _detect_gradient_segments(image, min_length, grad_threshold):
    gx = ndimage.sobel(image, axis=1)
    gy = ndimage.sobel(image, axis=0)
    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    if peak <= 0:
        return []
    mask = magnitude > grad_threshold * peak
    labels, count = ndimage.label(mask, structure=np.ones((3, 3)))
    segments = []
    for lab in range(1, count + 1):
        rows, cols = np.nonzero(labels == lab)
        if len(rows) < 5:
            continue
        pts = np.column_stack([cols, rows]).astype(float)  # (u, v)
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / len(pts)
        eigvals, eigvecs = np.linalg.eigh(cov)
        if eigvals[1] < 1e-12 or eigvals[0] / eigvals[1] > 0.1:
            continue  # not elongated enough to be a segment
        axis = eigvecs[:, 1]
        proj = centered @ axis
        a = pts.mean(axis=0) + proj.min() * axis
        b = pts.mean(axis=0) + proj.max() * axis
        seg = Segment2D(a, b, descriptor_id=len(segments))
        if seg.length >= min_length:
            segments.append(seg)
    return segments


@dataclass
class PointObservation:
    """Pixel observation of a point feature with a correspondence id."""

    uv: np.ndarray
    descriptor_id: int = -1

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=float).reshape(2)


@dataclass
class Keyframe:
    """Camera pose plus the 2D observations made from it."""

    id: int
    pose: "Pose"                   # camera-to-world
    segments: list = field(default_factory=list)
    points: list = field(default_factory=list)
    timestamp: float = 0.0
