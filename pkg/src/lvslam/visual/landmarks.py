"""Line and point landmarks: triangulation, fusion absorption, endpoint
trimming, and depth-change outlier rejection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import VisualConfig
from ..errors import (
    DegenerateTriangulation,
    InsufficientBaseline,
    NoValidObservation,
    ParallelPlanes,
)
from ..fusion import FusionLine
from ..geometry import Plane, PluckerLine, Pose
from .segments import Segment2D

TRIANGULATED = "triangulated"
FUSION = "fusion"


@dataclass
class LineLandmark:
    id: int
    line: PluckerLine
    source: str                                   # triangulated | fusion
    observations: list = field(default_factory=list)  # (keyframe id, Segment2D)
    fusion_direction: Optional[np.ndarray] = None     # d_fu, world frame

    def add_observation(self, keyframe_id: int, segment: Segment2D) -> None:
        self.observations.append((keyframe_id, segment))

    def attach_fusion_direction(self, d_fu) -> None:
        """Store d_fu, flipping the state line to its hemisphere."""
        d_fu = np.asarray(d_fu, dtype=float)
        d_fu = d_fu / np.linalg.norm(d_fu)
        if np.dot(self.line.direction, d_fu) < 0:
            self.line = PluckerLine(
                -self.line.moment, -self.line.direction,
                endpoints=None if self.line.endpoints is None
                else self.line.endpoints[::-1].copy())
        self.fusion_direction = d_fu


@dataclass
class PointLandmark:
    id: int
    position: np.ndarray
    observations: list = field(default_factory=list)  # (keyframe id, uv)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


def projection_plane(segment: Segment2D, pose: Pose, K) -> Plane:
    """World-frame plane through the camera center and the observed segment.

    pi = P^T l with P = K [R | t] the world-to-camera projection and
    l = xs x xe the homogeneous image line.
    """
    l = segment.image_line()
    inv = pose.inverse()
    P = np.asarray(K, dtype=float) @ np.hstack(
        [inv.rotation_matrix(), inv.translation[:, None]])
    coeffs = P.T @ l
    if np.linalg.norm(coeffs[:3]) < 1e-12:
        raise DegenerateTriangulation("projection plane has zero normal")
    return Plane(coeffs)


def triangulate_line(obs1: Segment2D, obs2: Segment2D, pose1: Pose, pose2: Pose,
                     K, min_baseline: float = 0.05,
                     eps_parallel: float = 1e-6) -> PluckerLine:
    """Two-view line triangulation by projection-plane intersection.

    Returns the world-frame line. Raises InsufficientBaseline for nearby
    views and DegenerateTriangulation when the segment is collinear with the
    epipolar plane (parallel projection planes).
    """
    baseline = np.linalg.norm(pose1.translation - pose2.translation)
    if baseline <= min_baseline:
        raise InsufficientBaseline(f"baseline {baseline:.4f} m too short")
    pi1 = projection_plane(obs1, pose1, K)
    pi2 = projection_plane(obs2, pose2, K)
    try:
        return PluckerLine.from_plane_pair(pi1, pi2, eps_parallel=eps_parallel)
    except ParallelPlanes as exc:
        raise DegenerateTriangulation(str(exc)) from exc


def absorb_fusion_line(fl: FusionLine, landmark_id: int = -1,
                       pose: Pose | None = None) -> LineLandmark:
    """Turn a fusion line into a landmark via its endpoints.

    `pose` maps the fusion (camera) frame to world; endpoints and d_fu are
    stored in world coordinates.
    """
    a, b = fl.endpoints
    d_fu = fl.mean_direction
    if pose is not None:
        a, b = pose.transform(a), pose.transform(b)
        d_fu = pose.rotate(d_fu)
    landmark = LineLandmark(
        id=landmark_id,
        line=PluckerLine.from_endpoints(a, b),
        source=FUSION,
    )
    landmark.attach_fusion_direction(d_fu)
    return landmark


def trim_endpoints(landmark: LineLandmark, observations, poses, K,
                   eps: float = 1e-9) -> PluckerLine:
    """Re-trim landmark endpoints from the union of observed extents.

    Every observed segment endpoint back-projects to a ray; the closest point
    on the landmark's infinite line to each ray marks an extent sample, and
    the extremal samples become the endpoints. Rays parallel to the line have
    no unique closest point and are skipped; if every ray is perpendicular to
    the line (end-on view), the observations carry no extent information.
    """
    line = landmark.line
    K_inv = np.linalg.inv(np.asarray(K, dtype=float))
    params = []
    informative = False
    for segment, pose in zip(observations, poses):
        center = pose.translation
        for uv_h in (segment.xs_h, segment.xe_h):
            ray = pose.rotate(K_inv @ uv_h)
            ray = ray / np.linalg.norm(ray)
            along = abs(float(np.dot(ray, line.direction)))
            if 1.0 - along * along <= eps:
                continue
            if along > eps:
                informative = True
            point = line.closest_point_to_ray(center, ray)
            params.append(line.parameter_of(point))
    if not params or not informative:
        raise NoValidObservation("no observation ray constrains the endpoints")
    a = line.point_at(min(params))
    b = line.point_at(max(params))
    return PluckerLine(line.moment, line.direction, endpoints=np.stack([a, b]))


def depth_check(source: str, depth_change_ratio: float,
                config: VisualConfig | None = None) -> bool:
    """Keep/reject rule on a landmark's depth-change ratio.

    The caller supplies the landmark's deviation from the scene median depth
    change; rejection thresholds are 0.1 for triangulated and 0.2 for
    fusion-sourced landmarks, with the boundary kept (closed interval).
    Returns True to keep.
    """
    cfg = config or VisualConfig()
    threshold = cfg.depth_ratio_fusion if source == FUSION \
        else cfg.depth_ratio_triangulated
    return not depth_change_ratio > threshold


def triangulate_point(uv1, uv2, pose1: Pose, pose2: Pose, K,
                      min_baseline: float = 0.05) -> np.ndarray:
    """Two-view midpoint triangulation of a point feature."""
    baseline = np.linalg.norm(pose1.translation - pose2.translation)
    if baseline <= min_baseline:
        raise InsufficientBaseline(f"baseline {baseline:.4f} m too short")
    K_inv = np.linalg.inv(np.asarray(K, dtype=float))
    c1, c2 = pose1.translation, pose2.translation
    r1 = pose1.rotate(K_inv @ np.array([uv1[0], uv1[1], 1.0]))
    r2 = pose2.rotate(K_inv @ np.array([uv2[0], uv2[1], 1.0]))
    r1 /= np.linalg.norm(r1)
    r2 /= np.linalg.norm(r2)
    b = float(np.dot(r1, r2))
    denom = 1.0 - b * b
    if denom < 1e-12:
        raise DegenerateTriangulation("parallel viewing rays")
    w = c1 - c2
    t1 = (b * np.dot(r2, w) - np.dot(r1, w)) / denom
    t2 = (np.dot(r2, w) - b * np.dot(r1, w)) / denom
    return 0.5 * ((c1 + t1 * r1) + (c2 + t2 * r2))
