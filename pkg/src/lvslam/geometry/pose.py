"""Rigid poses as immutable (quaternion, translation, timestamp) values."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FractionOutOfRange
from .rotation import (
    quat_conjugate,
    quat_identity,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_slerp,
    quat_to_matrix,
    quat_from_matrix,
)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_out = R(q) @ p_in + t.

    In pipeline code a `Pose` is a sensor-to-world transform unless stated
    otherwise; trajectory files use the same convention.
    """

    rotation: np.ndarray = field(default_factory=quat_identity)  # (x, y, z, w)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(quat_normalize(self.rotation)))
        object.__setattr__(self, "translation", _frozen(self.translation))

    @staticmethod
    def identity(timestamp: float = 0.0) -> "Pose":
        return Pose(quat_identity(), np.zeros(3), timestamp)

    @staticmethod
    def from_matrix(T, timestamp: float = 0.0) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(quat_from_matrix(T[:3, :3]), T[:3, 3], timestamp)

    @staticmethod
    def from_rt(R, t, timestamp: float = 0.0) -> "Pose":
        return Pose(quat_from_matrix(R), np.asarray(t, dtype=float), timestamp)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self @ other)(p) = self(other(p))."""
        q = quat_multiply(self.rotation, other.rotation)
        t = quat_rotate(self.rotation, other.translation) + self.translation
        return Pose(q, t, other.timestamp)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        q_inv = quat_conjugate(self.rotation)
        return Pose(q_inv, -quat_rotate(q_inv, self.translation), self.timestamp)

    def transform(self, points) -> np.ndarray:
        """Apply to point(s), shape (3,) or (N, 3)."""
        return quat_rotate(self.rotation, points) + self.translation

    def rotate(self, vectors) -> np.ndarray:
        """Apply the rotation only (directions, normals)."""
        return quat_rotate(self.rotation, vectors)

    def with_timestamp(self, timestamp: float) -> "Pose":
        return Pose(self.rotation, self.translation, timestamp)

    def rotation_angle_to(self, other: "Pose") -> float:
        """Geodesic rotation distance in radians."""
        dot = abs(float(np.dot(self.rotation, other.rotation)))
        return 2.0 * np.arccos(min(dot, 1.0))


def interpolate_pose(pose0: Pose, pose1: Pose, s: float) -> Pose:
    """Pose at fraction s of the way from pose0 to pose1.

    Rotation by quaternion slerp, translation linear; s=0 and s=1 return the
    endpoints exactly.
    """
    if not 0.0 <= s <= 1.0:
        raise FractionOutOfRange(f"interpolation fraction {s} outside [0, 1]")
    if s == 0.0:
        return pose0
    if s == 1.0:
        return pose1
    q = quat_slerp(pose0.rotation, pose1.rotation, s)
    t = (1.0 - s) * pose0.translation + s * pose1.translation
    stamp = (1.0 - s) * pose0.timestamp + s * pose1.timestamp
    return Pose(q, t, stamp)
