"""Planes as homogeneous 4-vectors (nx, ny, nz, w) with unit normal part."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ZeroVector


@dataclass(frozen=True)
class Plane:
    """Points p on the plane satisfy n . p + w = 0."""

    coefficients: np.ndarray  # (4,)

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float)
        n = np.linalg.norm(coeffs[:3])
        if n < 1e-12:
            raise ZeroVector("plane normal must be nonzero")
        coeffs /= n
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def normal(self) -> np.ndarray:
        return self.coefficients[:3]

    @property
    def offset(self) -> float:
        return float(self.coefficients[3])

    @staticmethod
    def from_point_normal(point, normal) -> "Plane":
        normal = np.asarray(normal, dtype=float)
        return Plane(np.concatenate([normal, [-float(np.dot(normal, point))]]))

    @staticmethod
    def from_points(p0, p1, p2) -> "Plane":
        p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
        return Plane.from_point_normal(p0, np.cross(p1 - p0, p2 - p0))

    def signed_distance(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.normal + self.offset
