"""Supervision of the dual-odometry system: tracking-health assessment with
hysteresis, and composition of the final trajectory with LiDAR failover."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SupervisorConfig
from .errors import EmptyStreams
from .geometry import Pose
from .visual.tracking import LOST, TrackingStatus

VISUAL = "VISUAL"
LIDAR = "LIDAR"


@dataclass
class HealthRecord:
    frame_id: int
    status: str
    point_inliers: int
    line_inliers: int
    source: str


@dataclass
class HealthTimeline:
    records: list = field(default_factory=list)

    def append(self, record: HealthRecord) -> None:
        self.records.append(record)

    def sources(self) -> list:
        return [r.source for r in self.records]

    def rows(self):
        for r in self.records:
            yield (r.frame_id, r.status, r.point_inliers, r.line_inliers,
                   r.source)


class TrackingMonitor:
    """Hysteresis state machine deciding the active odometry source.

    A frame is unhealthy when tracking reports LOST, too few point inliers,
    or too few total inliers. The source switches to LIDAR after h
    consecutive unhealthy frames and back to VISUAL only after h consecutive
    healthy frames.
    """

    def __init__(self, config: SupervisorConfig | None = None):
        self.cfg = config or SupervisorConfig()
        self.active = VISUAL
        self._streak = 0

    def unhealthy(self, status: TrackingStatus) -> bool:
        return (status.state == LOST
                or status.point_inliers < self.cfg.min_point_inliers
                or status.total_inliers < self.cfg.min_total_inliers)

    def assess(self, status: TrackingStatus) -> str:
        bad = self.unhealthy(status)
        if self.active == VISUAL:
            self._streak = self._streak + 1 if bad else 0
            if self._streak >= self.cfg.hysteresis_frames:
                self.active = LIDAR
                self._streak = 0
        else:
            self._streak = self._streak + 1 if not bad else 0
            if self._streak >= self.cfg.hysteresis_frames:
                self.active = VISUAL
                self._streak = 0
        return self.active


@dataclass
class SystemTrajectory:
    entries: list = field(default_factory=list)   # (timestamp, Pose, source)

    def poses(self) -> list:
        return [pose for _, pose, _ in self.entries]

    def timestamps(self) -> np.ndarray:
        return np.array([t for t, _, _ in self.entries])

    def sources(self) -> list:
        return [s for _, _, s in self.entries]


def compose_trajectory(visual_poses, lidar_poses, timeline: HealthTimeline,
                       lidar_to_camera: Pose | None = None) -> SystemTrajectory:
    """Splice the two odometry streams along the health timeline.

    Per frame the active source's pose is emitted in the camera/world
    convention (LiDAR poses mapped through the extrinsics). At each source
    switch a constant rigid offset aligns the incoming stream with the last
    emitted pose, so the composed trajectory stays continuous.
    """
    if not visual_poses and not lidar_poses:
        raise EmptyStreams("no poses to compose")
    n = len(timeline.records)
    t_lc = (lidar_to_camera or Pose.identity())

    def source_pose(source: str, k: int) -> Pose:
        if source == VISUAL:
            return visual_poses[k]
        mapped = lidar_poses[k] @ t_lc
        return mapped.with_timestamp(lidar_poses[k].timestamp)

    out = SystemTrajectory()
    correction = Pose.identity()
    prev_source = None
    for k in range(n):
        record = timeline.records[k]
        source = record.source
        if prev_source is not None and source != prev_source:
            # match the previous emitted pose at the previous frame
            prev_emitted = out.entries[-1][1]
            correction = prev_emitted @ source_pose(source, k - 1).inverse()
        pose = correction @ source_pose(source, k)
        out.entries.append((pose.timestamp, pose, source))
        prev_source = source
    return out
