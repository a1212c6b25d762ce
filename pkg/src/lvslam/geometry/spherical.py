"""Spherical projection and great-circle arc sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import AntipodalEndpoints, ZeroVector


@dataclass(frozen=True)
class SphericalPoint:
    """azimuth in [-pi, pi), elevation in [-pi/2, pi/2], range r > 0."""

    azimuth: float
    elevation: float
    r: float

    def to_cartesian(self) -> np.ndarray:
        ce = math.cos(self.elevation)
        return self.r * np.array([
            ce * math.cos(self.azimuth),
            ce * math.sin(self.azimuth),
            math.sin(self.elevation),
        ])


def spherical_project(p) -> SphericalPoint:
    """Map a Cartesian point to spherical coordinates.

    Convention: azimuth = atan2(y, x), elevation = asin(z/r). At the poles
    (x = y = 0) the azimuth is 0.
    """
    p = np.asarray(p, dtype=float)
    r = float(np.linalg.norm(p))
    if r < 1e-300:
        raise ZeroVector("cannot project the zero vector")
    azimuth = math.atan2(p[1], p[0])
    if azimuth >= math.pi:  # fold atan2's +pi onto -pi for a half-open range
        azimuth -= 2.0 * math.pi
    # atan2 form stays well-conditioned near the poles, unlike asin(z/r)
    elevation = math.atan2(p[2], math.hypot(p[0], p[1]))
    return SphericalPoint(azimuth, elevation, r)


def angle_between(u, v) -> float:
    """Numerically stable angle between two vectors, in [0, pi]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return math.atan2(np.linalg.norm(np.cross(u, v)), float(np.dot(u, v)))


def sample_arc(dir_start, dir_end, delta_phi: float,
               eps_antipodal: float = 1e-9) -> np.ndarray:
    """Uniform unit-vector samples along the great-circle arc start -> end.

    Returns ceil(angle/delta_phi) + 1 samples including both endpoints, with
    exactly uniform spacing <= delta_phi. A zero-length arc yields one sample.
    """
    if delta_phi <= 0.0:
        raise ValueError("delta_phi must be positive")
    u = np.asarray(dir_start, dtype=float)
    v = np.asarray(dir_end, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    omega = angle_between(u, v)
    if omega >= math.pi - eps_antipodal:
        raise AntipodalEndpoints("arc endpoints are antipodal")
    # tolerance keeps exact divisions (e.g. 90/30) from picking up a sample
    n_steps = max(0, math.ceil(omega / delta_phi - 1e-9))
    if n_steps == 0:
        return u[None, :].copy()
    sin_omega = math.sin(omega)
    fractions = np.arange(n_steps + 1) / n_steps
    samples = (np.sin((1.0 - fractions)[:, None] * omega) * u
               + np.sin(fractions[:, None] * omega) * v) / sin_omega
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    return samples
