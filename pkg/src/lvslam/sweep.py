"""One LiDAR revolution with per-point capture times, plus deskewing.

Each point carries its time offset from sweep start; the sweep ends at
`end_timestamp` and covers `duration` seconds. Motion compensation re-expresses
every point in the sensor frame at the sweep-end instant, interpolating the
sensor pose linearly (slerp for rotation) between the sweep-boundary poses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TimestampOutOfSweep
from .geometry import Pose, interpolate_pose


@dataclass
class SensorSweep:
    points: np.ndarray          # (N, 3) sensor-frame coordinates at capture time
    time_offsets: np.ndarray    # (N,) seconds from sweep start, non-decreasing
    end_timestamp: float
    duration: float
    ground_truth_indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.time_offsets = np.asarray(self.time_offsets, dtype=float)
        if self.duration <= 0:
            raise ValueError("sweep duration must be positive")
        if len(self.time_offsets) != len(self.points):
            raise ValueError("time offsets and points length mismatch")
        if len(self.time_offsets) > 1 and np.any(np.diff(self.time_offsets) < 0):
            raise ValueError("time offsets must be non-decreasing")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def start_timestamp(self) -> float:
        return self.end_timestamp - self.duration


def motion_compensate_sweep(sweep: SensorSweep, pose_start: Pose,
                            pose_end: Pose) -> np.ndarray:
    """Deskew: express every sweep point in the sensor frame at sweep end.

    pose_start/pose_end are the sensor poses at the sweep boundaries. A point
    captured at fraction s is mapped through T_end^-1 @ T(s); a point stamped
    exactly at sweep end is returned unchanged.
    """
    offsets = sweep.time_offsets
    if len(offsets) == 0:
        return sweep.points.copy()
    if np.any(offsets < -1e-12) or np.any(offsets > sweep.duration + 1e-12):
        raise TimestampOutOfSweep("point offsets must lie within [0, duration]")

    end_inv = pose_end.inverse()
    out = np.empty_like(sweep.points)
    # points sharing a time offset share one interpolated pose
    unique_offsets, inverse = np.unique(offsets, return_inverse=True)
    for k, offset in enumerate(unique_offsets):
        s = min(max(offset / sweep.duration, 0.0), 1.0)
        correction = end_inv @ interpolate_pose(pose_start, pose_end, s)
        sel = inverse == k
        out[sel] = correction.transform(sweep.points[sel])
    return out
