"""Plücker line algebra: construction, transforms, projection, and the
minimal 4-DoF orthonormal parameterization used by the optimizer.

A line is stored as (moment m, direction d) with |d| = 1 and m . d = 0;
m = p x d for any point p on the line, so |m| is the distance of the line
from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DegenerateLine, LineThroughCenter, ParallelPlanes
from .plane import Plane
from .pose import Pose
from .rotation import orthonormal_complement, skew, so3_exp


@dataclass(frozen=True)
class PluckerLine:
    moment: np.ndarray                      # (3,)
    direction: np.ndarray                   # (3,), unit
    endpoints: Optional[np.ndarray] = None  # (2, 3) points on the line

    def __post_init__(self):
        d = np.array(self.direction, dtype=float)
        m = np.array(self.moment, dtype=float)
        dn = np.linalg.norm(d)
        if dn < 1e-12:
            raise DegenerateLine("line direction must be nonzero")
        d /= dn
        m /= dn
        drift = float(np.dot(m, d))
        if abs(drift) > 1e-6 * max(1.0, np.linalg.norm(m)):
            raise DegenerateLine("moment and direction are not orthogonal")
        m -= drift * d
        d.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "moment", m)
        if self.endpoints is not None:
            ep = np.array(self.endpoints, dtype=float).reshape(2, 3)
            ep.setflags(write=False)
            object.__setattr__(self, "endpoints", ep)

    @staticmethod
    def from_endpoints(a, b, eps_length: float = 1e-6) -> "PluckerLine":
        """Line through segment a -> b; m = a x b, d = (b - a)/|b - a|."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        length = np.linalg.norm(d)
        if length <= eps_length:
            raise DegenerateLine(f"segment length {length:.2e} below {eps_length:.2e}")
        return PluckerLine(np.cross(a, b) / length, d / length,
                           endpoints=np.stack([a, b]))

    @staticmethod
    def from_plane_pair(plane1: Plane, plane2: Plane,
                        eps_parallel: float = 1e-6) -> "PluckerLine":
        """Intersection line via the dual Plücker matrix p1 p2^T - p2 p1^T."""
        p1 = plane1.coefficients
        p2 = plane2.coefficients
        if np.linalg.norm(np.cross(p1[:3], p2[:3])) <= eps_parallel:
            raise ParallelPlanes("planes are parallel within tolerance")
        dual = np.outer(p1, p2) - np.outer(p2, p1)
        # top-left 3x3 block is skew(n2 x n1) = skew(-d); last row holds m
        direction = -np.array([dual[2, 1], dual[0, 2], dual[1, 0]])
        moment = dual[3, :3]
        return PluckerLine(moment, direction)

    @staticmethod
    def from_point_direction(point, direction) -> "PluckerLine":
        point = np.asarray(point, dtype=float)
        direction = np.asarray(direction, dtype=float)
        n = np.linalg.norm(direction)
        if n < 1e-12:
            raise DegenerateLine("line direction must be nonzero")
        d = direction / n
        return PluckerLine(np.cross(point, d), d)

    def point_closest_to_origin(self) -> np.ndarray:
        return np.cross(self.direction, self.moment)

    def point_at(self, t: float) -> np.ndarray:
        return self.point_closest_to_origin() + t * self.direction

    def parameter_of(self, point) -> float:
        """Signed arclength of the orthogonal projection of `point`."""
        return float(np.dot(np.asarray(point, dtype=float)
                            - self.point_closest_to_origin(), self.direction))

    def distance_to_point(self, point) -> float:
        point = np.asarray(point, dtype=float)
        return float(np.linalg.norm(np.cross(point, self.direction) - self.moment))

    def transform(self, pose: Pose) -> "PluckerLine":
        """Express the line in the frame p' = R p + t."""
        R = pose.rotation_matrix()
        d = R @ self.direction
        m = R @ self.moment + np.cross(pose.translation, d)
        endpoints = None
        if self.endpoints is not None:
            endpoints = pose.transform(self.endpoints)
        return PluckerLine(m, d, endpoints=endpoints)

    def with_endpoints(self, a, b) -> "PluckerLine":
        """Attach endpoints, snapping them onto the line."""
        a = self.point_at(self.parameter_of(a))
        b = self.point_at(self.parameter_of(b))
        return PluckerLine(self.moment, self.direction, endpoints=np.stack([a, b]))

    def closest_point_to_ray(self, origin, ray_dir,
                             eps: float = 1e-9) -> np.ndarray:
        """Point on this line nearest to the ray (origin, ray_dir).

        Raises DegenerateLine when the ray is parallel to the line.
        """
        r = np.asarray(ray_dir, dtype=float)
        r = r / np.linalg.norm(r)
        d = self.direction
        b = float(np.dot(d, r))
        denom = 1.0 - b * b
        if denom <= eps:
            raise DegenerateLine("ray parallel to line")
        p0 = self.point_closest_to_origin()
        e = np.asarray(origin, dtype=float) - p0
        t = (np.dot(d, e) - b * np.dot(r, e)) / denom
        return p0 + t * d


def line_projection_matrix(K) -> np.ndarray:
    """3x3 matrix mapping a camera-frame line moment to the image line."""
    K = np.asarray(K, dtype=float)
    fx, fy = K[0, 0], K[1, 1]
    cx, cy = K[0, 2], K[1, 2]
    return np.array([
        [fy, 0.0, 0.0],
        [0.0, fx, 0.0],
        [-fy * cx, -fx * cy, fx * fy],
    ])


def project_line(pose: Pose, line: PluckerLine, K,
                 eps_center: float = 1e-9) -> np.ndarray:
    """Homogeneous image line l' of a world line seen by a camera at `pose`.

    `pose` is camera-to-world. Any world point on the line projects onto l'
    (x^T l' = 0 in pixel homogeneous coordinates).
    """
    cam_line = line.transform(pose.inverse())
    if np.linalg.norm(cam_line.moment) <= eps_center:
        raise LineThroughCenter("line passes through the camera center")
    return line_projection_matrix(K) @ cam_line.moment


@dataclass(frozen=True)
class OrthonormalLineParam:
    """Minimal line parameterization: a frame U in SO(3) plus one angle.

    U's columns are (m/|m|, d, m x d / |m x d|); the angle encodes the
    moment/direction magnitude ratio, i.e. atan2(|d|, |m|). Updates apply a
    right-multiplied SO(3) exponential to U and add to the angle.
    """

    U: np.ndarray        # (3, 3)
    w_angle: float

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @staticmethod
    def from_line(line: PluckerLine, eps: float = 1e-12) -> "OrthonormalLineParam":
        m, d = line.moment, line.direction
        mn = np.linalg.norm(m)
        u1 = m / mn if mn > eps else orthonormal_complement(d)
        u3 = np.cross(u1, d)
        U = np.column_stack([u1, d, u3])
        return OrthonormalLineParam(U, float(np.arctan2(1.0, mn)))

    def to_line(self) -> PluckerLine:
        w1, w2 = np.cos(self.w_angle), np.sin(self.w_angle)
        if abs(w2) < 1e-12:
            raise DegenerateLine("line at infinity (sin of W angle is zero)")
        direction = np.sign(w2) * self.U[:, 1]
        moment = (w1 / abs(w2)) * self.U[:, 0]
        return PluckerLine(moment, direction)

    def updated(self, delta) -> "OrthonormalLineParam":
        """Apply a 4-vector update (3 for U, 1 for the angle)."""
        delta = np.asarray(delta, dtype=float)
        return OrthonormalLineParam(self.U @ so3_exp(delta[:3]),
                                    self.w_angle + float(delta[3]))

    def homogeneous(self) -> tuple[np.ndarray, np.ndarray]:
        """Projective (moment, direction) pair (cos w * u1, sin w * u2)."""
        return np.cos(self.w_angle) * self.U[:, 0], np.sin(self.w_angle) * self.U[:, 1]


def closest_points_between_lines(line_a: PluckerLine, line_b: PluckerLine,
                                 eps: float = 1e-12):
    """(point on a, point on b) at minimum separation; None if parallel."""
    da, db = line_a.direction, line_b.direction
    b = float(np.dot(da, db))
    denom = 1.0 - b * b
    if denom <= eps:
        return None
    pa = line_a.point_closest_to_origin()
    pb = line_b.point_closest_to_origin()
    w = pa - pb
    ta = (b * np.dot(db, w) - np.dot(da, w)) / denom
    tb = (np.dot(db, w) - b * np.dot(da, w)) / denom
    return pa + ta * da, pb + tb * db


__all__ = [
    "PluckerLine",
    "OrthonormalLineParam",
    "project_line",
    "line_projection_matrix",
    "closest_points_between_lines",
    "skew",
]
