"""Frame-to-map visual tracking and the sequential visual odometry worker.

Tracking matches observations to landmarks by correspondence id, refines the
6-DoF pose against the fixed local map, and reports inlier counts; the
worker layers map management on top: absorbing fusion lines as landmarks,
two-view triangulation of points and lines, windowed bundle adjustment,
endpoint trimming, and depth-change outlier rejection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import CameraConfig, SupervisorConfig, VisualConfig
from ..errors import (
    DegenerateLine,
    DegenerateTriangulation,
    InsufficientBaseline,
    LvslamError,
    NotConverged,
    NoValidObservation,
    RankDeficient,
)
from ..geometry import OrthonormalLineParam, Pose, so3_exp
from .ba import bundle_adjust
from .landmarks import (
    FUSION,
    TRIANGULATED,
    LineLandmark,
    PointLandmark,
    absorb_fusion_line,
    depth_check,
    triangulate_line,
    triangulate_point,
    trim_endpoints,
)
from .residuals import (
    point_residual,
    point_residual_jacobians,
    segment_residual,
    segment_residual_jacobians,
)
from .segments import Keyframe

OK = "OK"
LOST = "LOST"


@dataclass
class TrackingStatus:
    state: str
    point_inliers: int
    line_inliers: int
    frame_id: int

    @property
    def total_inliers(self) -> int:
        return self.point_inliers + self.line_inliers


def refine_pose(init: Pose, point_matches, line_matches, K,
                cfg: VisualConfig) -> Pose:
    """Gauss-Newton pose-only refinement against fixed landmarks.

    point_matches: (position, uv) pairs; line_matches: (PluckerLine,
    Segment2D) pairs. Huber weights bound outlier influence.
    """
    R = init.inverse().rotation_matrix()
    t = init.inverse().translation
    line_params = [OrthonormalLineParam.from_line(line)
                   for line, _ in line_matches]
    lam = 1e-4
    for _ in range(cfg.track_max_iterations):
        H = np.zeros((6, 6))
        g = np.zeros(6)
        total = 0
        for p_w, uv in point_matches:
            try:
                e, J, _ = point_residual_jacobians(R, t, K, p_w, uv)
            except ValueError:
                continue
            norm = float(np.linalg.norm(e))
            w = 1.0 if norm <= cfg.huber_pixels else cfg.huber_pixels / norm
            H += w * J.T @ J
            g += w * J.T @ e
            total += 1
        for param, (_, seg) in zip(line_params, line_matches):
            try:
                e, J, _ = segment_residual_jacobians(
                    R, t, param.U, param.w_angle, K, seg.xs_h, seg.xe_h)
            except LvslamError:
                continue
            norm = float(np.linalg.norm(e))
            w = 1.0 if norm <= cfg.huber_pixels else cfg.huber_pixels / norm
            H += w * J.T @ J
            g += w * J.T @ e
            total += 1
        if total < 3:
            break
        try:
            delta = np.linalg.solve(H + lam * np.diag(np.maximum(np.diag(H),
                                                                 1e-6)), -g)
        except np.linalg.LinAlgError:
            break
        R = R @ so3_exp(delta[:3])
        t = t + delta[3:]
        if np.max(np.abs(delta)) < 1e-10:
            break
    return Pose.from_rt(R, t).inverse().with_timestamp(init.timestamp)


def count_inliers(pose: Pose, point_matches, line_matches, K,
                  gate_px: float):
    inv = pose.inverse()
    R, t = inv.rotation_matrix(), inv.translation
    pts = 0
    for p_w, uv in point_matches:
        try:
            e = point_residual(R, t, K, p_w, uv)
        except ValueError:
            continue
        if np.linalg.norm(e) <= gate_px:
            pts += 1
    lines = 0
    for line, seg in line_matches:
        param = OrthonormalLineParam.from_line(line)
        try:
            e = segment_residual(R, t, param.U, param.w_angle, K,
                                 seg.xs_h, seg.xe_h)
        except LvslamError:
            continue
        if np.linalg.norm(e) <= gate_px:
            lines += 1
    return pts, lines


class VisualOdometry:
    """Sequential visual SLAM worker over synthetic frame observations.

    Landmarks are keyed by the observations' correspondence ids (segment and
    point descriptor ids), which stands in for descriptor matching.
    """

    def __init__(self, camera: CameraConfig | None = None,
                 config: VisualConfig | None = None,
                 supervisor: SupervisorConfig | None = None,
                 initial_pose: Pose | None = None):
        self.camera = camera or CameraConfig()
        self.cfg = config or VisualConfig()
        self.sup = supervisor or SupervisorConfig()
        self.K = self.camera.matrix()
        self.pose = initial_pose or Pose.identity()
        self.prev_pose = self.pose
        self.keyframes: list[Keyframe] = []
        self.line_landmarks: dict[int, LineLandmark] = {}
        self.point_landmarks: dict[int, PointLandmark] = {}
        self.pending_segments: dict[int, list] = {}
        self.pending_points: dict[int, list] = {}
        self.frame_count = 0

    # --- per-frame entry point ---

    def process_frame(self, observation, fusion_lines=(),
                      timestamp: float | None = None):
        """Track one frame and fold its data into the map.

        Returns (pose, TrackingStatus). New fusion lines become landmarks
        after the pose is resolved, so they first constrain the next frame.
        """
        stamp = observation.timestamp if timestamp is None else timestamp
        predicted = self._predict(stamp)

        point_matches = [(self.point_landmarks[o.descriptor_id].position, o.uv)
                         for o in observation.points
                         if o.descriptor_id in self.point_landmarks]
        line_matches = [(self.line_landmarks[s.descriptor_id].line, s)
                        for s in observation.segments
                        if s.descriptor_id in self.line_landmarks]
        if point_matches or line_matches:
            pose = refine_pose(predicted, point_matches, line_matches,
                               self.K, self.cfg)
        else:
            pose = predicted

        keyframe = Keyframe(id=self.frame_count, pose=pose,
                            segments=list(observation.segments),
                            points=list(observation.points), timestamp=stamp)
        self.keyframes.append(keyframe)
        self._record_observations(keyframe)
        self._absorb_fusion_lines(fusion_lines, pose, keyframe)
        self._triangulate_pending(keyframe)

        pts, lines = self._count_frame_inliers(keyframe)
        state = OK
        if pts < self.sup.min_point_inliers \
                or pts + lines < self.sup.min_total_inliers:
            state = LOST
        status = TrackingStatus(state=state, point_inliers=pts,
                                line_inliers=lines, frame_id=keyframe.id)

        if self.cfg.ba_every and len(self.keyframes) >= 2 \
                and keyframe.id % self.cfg.ba_every == 0 and state == OK:
            self._local_ba()
            pose = self.keyframes[-1].pose

        self.prev_pose = self.pose
        self.pose = self.keyframes[-1].pose
        self.frame_count += 1
        return self.pose, status

    # --- internals ---

    def _predict(self, stamp: float) -> Pose:
        motion = self.pose @ self.prev_pose.inverse()
        return (motion @ self.pose).with_timestamp(stamp)

    def _record_observations(self, keyframe: Keyframe) -> None:
        for seg in keyframe.segments:
            sid = seg.descriptor_id
            if sid in self.line_landmarks:
                self.line_landmarks[sid].add_observation(keyframe.id, seg)
            else:
                self.pending_segments.setdefault(sid, []).append(
                    (keyframe.id, seg))
        for obs in keyframe.points:
            pid = obs.descriptor_id
            if pid in self.point_landmarks:
                self.point_landmarks[pid].observations.append(
                    (keyframe.id, obs.uv))
            else:
                self.pending_points.setdefault(pid, []).append(
                    (keyframe.id, obs.uv))

    def _absorb_fusion_lines(self, fusion_lines, pose: Pose,
                             keyframe: Keyframe) -> None:
        for fl in fusion_lines:
            sid = fl.segment_id
            existing = self.line_landmarks.get(sid)
            if existing is not None:
                d_world = pose.rotate(fl.mean_direction)
                existing.attach_fusion_direction(d_world)
                continue
            try:
                landmark = absorb_fusion_line(fl, landmark_id=sid, pose=pose)
            except DegenerateLine:
                continue
            for kf_id, seg in self.pending_segments.pop(sid, []):
                landmark.add_observation(kf_id, seg)
            self.line_landmarks[sid] = landmark

    def _triangulate_pending(self, keyframe: Keyframe) -> None:
        kf_by_id = {kf.id: kf for kf in self.keyframes}
        for sid in list(self.pending_segments):
            obs = self.pending_segments[sid]
            if len(obs) < 2:
                continue
            (id1, seg1), (id2, seg2) = obs[0], obs[-1]
            try:
                line = triangulate_line(seg1, seg2, kf_by_id[id1].pose,
                                        kf_by_id[id2].pose, self.K,
                                        self.cfg.min_baseline)
            except (DegenerateTriangulation, InsufficientBaseline,
                    DegenerateLine):
                continue
            landmark = LineLandmark(id=sid, line=line, source=TRIANGULATED)
            landmark.observations = list(obs)
            try:
                landmark.line = trim_endpoints(
                    landmark, [s for _, s in obs],
                    [kf_by_id[i].pose for i, _ in obs], self.K)
            except NoValidObservation:
                pass
            self.line_landmarks[sid] = landmark
            del self.pending_segments[sid]
        for pid in list(self.pending_points):
            obs = self.pending_points[pid]
            if len(obs) < 2:
                continue
            (id1, uv1), (id2, uv2) = obs[0], obs[-1]
            try:
                position = triangulate_point(uv1, uv2, kf_by_id[id1].pose,
                                             kf_by_id[id2].pose, self.K,
                                             self.cfg.min_baseline)
            except (DegenerateTriangulation, InsufficientBaseline):
                continue
            landmark = PointLandmark(id=pid, position=position)
            landmark.observations = list(obs)
            self.point_landmarks[pid] = landmark
            del self.pending_points[pid]

    def _count_frame_inliers(self, keyframe: Keyframe):
        point_matches = [(self.point_landmarks[o.descriptor_id].position, o.uv)
                         for o in keyframe.points
                         if o.descriptor_id in self.point_landmarks]
        line_matches = [(self.line_landmarks[s.descriptor_id].line, s)
                        for s in keyframe.segments
                        if s.descriptor_id in self.line_landmarks]
        return count_inliers(keyframe.pose, point_matches, line_matches,
                             self.K, self.cfg.inlier_gate_px)

    def _local_ba(self) -> None:
        window = self.keyframes[-self.cfg.ba_window:]
        window_ids = {kf.id for kf in window}
        lines = [lm for lm in self.line_landmarks.values()
                 if sum(1 for kf_id, _ in lm.observations
                        if kf_id in window_ids) >= 2]
        points = [lm for lm in self.point_landmarks.values()
                  if sum(1 for kf_id, _ in lm.observations
                         if kf_id in window_ids) >= 2]
        if not lines and not points:
            return
        try:
            result = bundle_adjust(window, points, lines, self.K, self.cfg)
        except NotConverged as exc:
            result = exc.result
        except RankDeficient:
            return
        for kf in window:
            kf.pose = result.poses[kf.id].with_timestamp(kf.timestamp)
        for lm in points:
            lm.position = result.points[lm.id]
        for lm in lines:
            updated = result.lines[lm.id]
            if lm.line.endpoints is not None:
                updated = updated.with_endpoints(*lm.line.endpoints)
            lm.line = updated
            if lm.fusion_direction is not None \
                    and np.dot(lm.line.direction, lm.fusion_direction) < 0:
                lm.attach_fusion_direction(lm.fusion_direction)
        self._refresh_endpoints_and_depths(window_ids)

    def _refresh_endpoints_and_depths(self, window_ids) -> None:
        kf_by_id = {kf.id: kf for kf in self.keyframes}
        newest = self.keyframes[-1]
        inv = newest.pose.inverse()
        ratios = {}
        for sid, lm in self.line_landmarks.items():
            obs = [(kf_id, seg) for kf_id, seg in lm.observations
                   if kf_id in window_ids]
            if not obs or lm.line.endpoints is None:
                continue
            old_depth = self._median_depth(inv, lm.line.endpoints)
            try:
                lm.line = trim_endpoints(lm, [s for _, s in obs],
                                         [kf_by_id[i].pose for i, _ in obs],
                                         self.K)
            except NoValidObservation:
                continue
            new_depth = self._median_depth(inv, lm.line.endpoints)
            if old_depth > 1e-6:
                ratios[sid] = abs(new_depth - old_depth) / old_depth
        if not ratios:
            return
        median_ratio = float(np.median(list(ratios.values())))
        for sid, ratio in ratios.items():
            lm = self.line_landmarks[sid]
            if not depth_check(lm.source, abs(ratio - median_ratio), self.cfg):
                del self.line_landmarks[sid]

    @staticmethod
    def _median_depth(inv_pose: Pose, endpoints) -> float:
        depths = inv_pose.transform(endpoints)[:, 2]
        return float(np.median(depths))
