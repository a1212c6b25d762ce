"""Pinhole camera simulation over synthetic worlds.

Projects world segments and point landmarks into pixel observations with
ground-truth correspondence ids, Gaussian pixel noise, and schedule-driven
degradation (blackout, blur, low light).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import CameraConfig
from ..geometry import Pose
from ..visual.segments import PointObservation, Segment2D
from .schedule import FrameDegradation
from .world import World


@dataclass
class FrameObservation:
    """Synthetic camera frame: segments + points with ground-truth ids."""

    segments: list = field(default_factory=list)
    points: list = field(default_factory=list)
    timestamp: float = 0.0
    frame_id: int = -1


def _project(K, p_cam):
    return np.array([K[0, 0] * p_cam[0] / p_cam[2] + K[0, 2],
                     K[1, 1] * p_cam[1] / p_cam[2] + K[1, 2]])


def simulate_camera(world: World, pose: Pose, camera: CameraConfig,
                    noise_px: float = 0.0,
                    degradation: FrameDegradation | None = None,
                    rng: np.random.Generator | None = None,
                    frame_id: int = -1,
                    timestamp: float = 0.0) -> FrameObservation:
    """Observe the world from `pose` (camera-to-world).

    Segments keep their world index as descriptor id; both endpoints must be
    in front of the camera and inside the image. Blackout frames are empty;
    blur inflates endpoint noise and drops short segments; low light keeps
    each feature with probability `brightness`.
    """
    deg = degradation or FrameDegradation()
    rng = rng or np.random.default_rng(0)
    obs = FrameObservation(frame_id=frame_id, timestamp=timestamp)
    if deg.blackout:
        return obs
    K = camera.matrix()
    inv = pose.inverse()
    sigma = float(np.hypot(noise_px, deg.blur_px))
    near = 0.1

    for idx, (a, b) in enumerate(world.segments):
        pa = inv.transform(a)
        pb = inv.transform(b)
        if pa[2] < near or pb[2] < near:
            continue
        ua, ub = _project(K, pa), _project(K, pb)
        if not (_inside(ua, camera) and _inside(ub, camera)):
            continue
        if deg.brightness < 1.0 and rng.random() > deg.brightness:
            continue
        if sigma > 0:
            ua = ua + rng.normal(scale=sigma, size=2)
            ub = ub + rng.normal(scale=sigma, size=2)
        seg = Segment2D(ua, ub, descriptor_id=idx)
        if deg.blur_px > 0 and seg.length < 60.0:
            continue  # blur washes out short segments
        obs.segments.append(seg)

    for idx, p in enumerate(world.points):
        pc = inv.transform(p)
        if pc[2] < near:
            continue
        uv = _project(K, pc)
        if not _inside(uv, camera):
            continue
        if deg.brightness < 1.0 and rng.random() > deg.brightness:
            continue
        if sigma > 0:
            uv = uv + rng.normal(scale=sigma, size=2)
        obs.points.append(PointObservation(uv, descriptor_id=idx))
    return obs


def _inside(uv, camera: CameraConfig) -> bool:
    return 0.0 <= uv[0] <= camera.width and 0.0 <= uv[1] <= camera.height
