"""Foundational 3D math: poses, Plücker lines, planes, spherical projection."""

from .plane import Plane
from .plucker import (
    OrthonormalLineParam,
    PluckerLine,
    closest_points_between_lines,
    line_projection_matrix,
    project_line,
)
from .pose import Pose, interpolate_pose
from .rotation import (
    quat_from_axis_angle,
    quat_from_matrix,
    quat_identity,
    quat_multiply,
    quat_rotate,
    quat_slerp,
    quat_to_matrix,
    skew,
    so3_exp,
    so3_log,
)
from .spherical import SphericalPoint, angle_between, sample_arc, spherical_project

__all__ = [
    "Plane",
    "PluckerLine",
    "OrthonormalLineParam",
    "Pose",
    "SphericalPoint",
    "angle_between",
    "closest_points_between_lines",
    "interpolate_pose",
    "line_projection_matrix",
    "project_line",
    "quat_from_axis_angle",
    "quat_from_matrix",
    "quat_identity",
    "quat_multiply",
    "quat_rotate",
    "quat_slerp",
    "quat_to_matrix",
    "sample_arc",
    "skew",
    "so3_exp",
    "so3_log",
    "spherical_project",
]
