"""Spinning LiDAR simulation with per-point capture times.

The ray grid is cast once from the sweep-end pose (the canonical snapshot);
each returned world point is then re-expressed in the sensor frame at its
capture time using the same pose interpolation the deskewing code applies.
Compensating a constant-velocity sweep therefore reproduces the canonical
snapshot exactly, which is the property the motion-compensation contract
demands. Surfaces are rectangles; line structures are thin cylinders whose
returns land on the axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, interpolate_pose
from ..sweep import SensorSweep
from .world import World


@dataclass
class LidarModel:
    rings: int = 16
    azimuth_step_deg: float = 1.0
    vertical_fov_deg: float = 30.0
    max_range: float = 30.0
    min_range: float = 0.3
    edge_radius: float = 0.03

    def ray_grid(self):
        """(n_az, rings, 3) unit directions and (n_az,) azimuth fractions."""
        n_az = int(round(360.0 / self.azimuth_step_deg))
        azimuths = np.radians(np.arange(n_az) * self.azimuth_step_deg)
        half = np.radians(self.vertical_fov_deg) / 2.0
        elevations = (np.linspace(-half, half, self.rings) if self.rings > 1
                      else np.zeros(1))
        ce, se = np.cos(elevations), np.sin(elevations)
        ca, sa = np.cos(azimuths), np.sin(azimuths)
        dirs = np.empty((n_az, len(elevations), 3))
        dirs[..., 0] = ca[:, None] * ce[None, :]
        dirs[..., 1] = sa[:, None] * ce[None, :]
        dirs[..., 2] = se[None, :]
        return dirs, np.arange(n_az) / n_az


def _ray_rectangles(origin, dirs, quads, t_min, t_max):
    """Smallest valid hit distance per ray across rectangles."""
    n = len(dirs)
    best = np.full(n, np.inf)
    for quad in quads:
        c0, c1, _, c3 = quad
        e1 = c1 - c0
        e2 = c3 - c0
        normal = np.cross(e1, e2)
        nn = np.linalg.norm(normal)
        if nn < 1e-12:
            continue
        normal = normal / nn
        denom = dirs @ normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > 1e-12,
                         -((origin - c0) @ normal) / denom, np.inf)
        ok = (t >= t_min) & (t <= t_max)
        t_safe = np.where(ok, t, 0.0)
        rel = origin + t_safe[:, None] * dirs - c0
        s1 = rel @ e1
        s2 = rel @ e2
        ok &= (s1 >= 0) & (s1 <= e1 @ e1) & (s2 >= 0) & (s2 <= e2 @ e2)
        best = np.where(ok & (t < best), t, best)
    return best


def _ray_segments(origin, dirs, segments, radius, t_min, t_max):
    """Hit distances and axis points for thin-cylinder line structures."""
    n = len(dirs)
    best = np.full(n, np.inf)
    points = np.zeros((n, 3))
    for a, b in segments:
        axis = b - a
        length = np.linalg.norm(axis)
        if length < 1e-9:
            continue
        axis = axis / length
        w = origin - a
        bdot = dirs @ axis
        denom = 1.0 - bdot**2
        ok = denom > 1e-12
        safe = np.where(ok, denom, 1.0)
        dw = dirs @ w
        aw = float(axis @ w)
        t_ray = (bdot * aw - dw) / safe
        s_axis = (aw - bdot * dw) / safe
        closest_ray = origin + t_ray[:, None] * dirs
        closest_axis = a + s_axis[:, None] * axis
        dist = np.linalg.norm(closest_ray - closest_axis, axis=1)
        ok &= (dist <= radius) & (s_axis >= 0) & (s_axis <= length)
        ok &= (t_ray >= t_min) & (t_ray <= t_max)
        better = ok & (t_ray < best)
        best = np.where(better, t_ray, best)
        points[better] = closest_axis[better]
    return best, points


def simulate_lidar(world: World, pose_start: Pose, pose_end: Pose,
                   model: LidarModel | None = None, dropout: float = 0.0,
                   rng: np.random.Generator | None = None,
                   duration: float = 0.1,
                   end_timestamp: float | None = None) -> SensorSweep:
    """One revolution between two sensor poses (sensor-to-world).

    Points come back in the sensor frame at their capture time, azimuth-major
    so time offsets are non-decreasing. A static pose pair yields exactly the
    canonical snapshot.
    """
    model = model or LidarModel()
    rng = rng or np.random.default_rng(0)
    if end_timestamp is None:
        end_timestamp = pose_end.timestamp
    dirs_grid, fractions = model.ray_grid()
    n_az, rings, _ = dirs_grid.shape
    origin = pose_end.translation
    R_end = pose_end.rotation_matrix()

    flat_dirs = (dirs_grid.reshape(-1, 3) @ R_end.T)
    t_plane = _ray_rectangles(origin, flat_dirs, world.planes,
                              model.min_range, model.max_range)
    t_seg, seg_points = _ray_segments(origin, flat_dirs, world.segments,
                                      model.edge_radius, model.min_range,
                                      model.max_range)
    # edges sit on or just in front of surfaces: prefer the edge return
    use_seg = np.isfinite(t_seg) & (t_seg <= t_plane + model.edge_radius)
    use_plane = np.isfinite(t_plane) & ~use_seg
    hits_world = np.zeros((len(flat_dirs), 3))
    hits_world[use_plane] = origin + t_plane[use_plane, None] * flat_dirs[use_plane]
    hits_world[use_seg] = seg_points[use_seg]
    valid = use_seg | use_plane
    if dropout > 0.0:
        valid &= rng.random(len(valid)) >= dropout

    static = (np.array_equal(pose_start.rotation, pose_end.rotation)
              and np.array_equal(pose_start.translation, pose_end.translation))
    pts_out = []
    offs_out = []
    valid_grid = valid.reshape(n_az, rings)
    hits_grid = hits_world.reshape(n_az, rings, 3)
    end_inv = pose_end.inverse()
    for j in range(n_az):
        sel = valid_grid[j]
        if not np.any(sel):
            continue
        offset = fractions[j] * duration
        capture = (end_inv if static
                   else interpolate_pose(pose_start, pose_end,
                                         fractions[j]).inverse())
        pts_out.append(capture.transform(hits_grid[j][sel]))
        offs_out.append(np.full(int(sel.sum()), offset))
    if pts_out:
        points = np.vstack(pts_out)
        offsets = np.concatenate(offs_out)
    else:
        points = np.zeros((0, 3))
        offsets = np.zeros(0)
    return SensorSweep(points=points, time_offsets=offsets,
                       end_timestamp=end_timestamp, duration=duration)
