"""End-to-end pipeline: simulate (or load) a sequence, run both odometry
subsystems with fusion exchange each frame, supervise health, and write the
trajectory and report artifacts.

The run is a single deterministic worker interleaving the two subsystems in
a fixed per-frame schedule: deskew -> classify -> fusion association and
reconstruction -> LiDAR registration and map update -> visual tracking and
mapping -> health assessment. All randomness flows from the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import (
    EmptyCloud,
    InsufficientSupport,
    LvslamError,
    NoDominantCluster,
    ParallelPlanes,
    PoorPlaneFit,
    SourceError,
)
from .fusion import (
    DirectionIndex,
    VisualArc,
    associate_arc,
    motion_compensate_sweep,
    reconstruct_line_linear,
    reconstruct_line_planar,
)
from .geometry import Pose, interpolate_pose, quat_from_axis_angle, sample_arc
from .lidar import classify_points
from .lidar.features import FeatureCloud, LINEAR_CLASSES
from .lidar.odometry import LidarOdometry
from .sim import (
    DegradationSchedule,
    LidarModel,
    generate_scene,
    simulate_camera,
    simulate_lidar,
)
from .sim import io as sim_io
from .supervisor import (
    HealthRecord,
    HealthTimeline,
    TrackingMonitor,
    compose_trajectory,
)
from .sweep import SensorSweep
from .visual import detect_lines
from .visual.tracking import VisualOdometry


@dataclass
class PipelineResult:
    visual_poses: list
    lidar_poses: list
    system: "SystemTrajectory"
    timeline: HealthTimeline
    ground_truth_body: list
    ground_truth_camera: list
    fusion_line_count: int = 0
    correction_count: int = 0
    errors: list = field(default_factory=list)


def lidar_camera_extrinsic(cfg: PipelineConfig) -> Pose:
    """T_cl: maps LiDAR-frame coordinates into the camera frame."""
    sim = cfg.sim
    return Pose(np.array([sim.extrinsic_qx, sim.extrinsic_qy,
                          sim.extrinsic_qz, sim.extrinsic_qw]),
                np.array([sim.extrinsic_tx, sim.extrinsic_ty,
                          sim.extrinsic_tz]))


def preset_trajectory(preset: str, n_frames: int, dt: float,
                      height: float = 1.3) -> list:
    """Ground-truth body (LiDAR-frame) poses at each frame timestamp.

    Poses are also produced for the sweep leading into frame 0, so entry k
    corresponds to t = (k+1) * dt with one extra pose at t = 0.
    """
    poses = []
    for k in range(n_frames + 1):
        t = k * dt
        if preset == "room":
            # gentle arc around the room center, yaw following the tangent
            angle = 0.9 * np.pi * k / max(1, n_frames)
            radius = 1.3
            x = radius * math.sin(angle)
            y = -radius * (1.0 - math.cos(angle))
            yaw = -angle
        elif preset == "hall":
            x = 0.22 * k
            y = 0.4 * math.sin(0.08 * k)
            yaw = 0.4 * 0.08 * math.cos(0.08 * k)
        elif preset == "gate":
            x = 0.18 * k
            y = 0.15 * math.sin(0.05 * k)
            yaw = 0.03 * math.sin(0.11 * k)
        else:
            x, y, yaw = 0.05 * k, 0.0, 0.0
        poses.append(Pose(quat_from_axis_angle([0, 0, 1], yaw),
                          np.array([x, y, height]), timestamp=t))
    return poses


class FusionFrame:
    """Per-frame fusion exchange: arcs vs LiDAR features on the unit sphere."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.K_inv = np.linalg.inv(cfg.camera.matrix())
        self.gate = math.radians(cfg.fusion.gate_deg)
        self.arc_step = cfg.arc_step_rad()
        self.t_cl = lidar_camera_extrinsic(cfg)

    def exchange(self, segments, cloud: FeatureCloud, map_cloud_camera=None):
        """Returns (fusion lines in camera frame, corrections in LiDAR frame).

        `cloud` is the current deskewed sensor-frame feature cloud;
        `map_cloud_camera` optionally extends the index with accumulated map
        points already expressed in the camera frame.
        """
        cam_cloud = cloud.transformed(self.t_cl)
        clouds = [cam_cloud]
        ids = [np.arange(len(cam_cloud))]
        if map_cloud_camera is not None and len(map_cloud_camera) > 0:
            clouds.append(map_cloud_camera)
            ids.append(-np.ones(len(map_cloud_camera), dtype=int))
        merged = cam_cloud if len(clouds) == 1 else _merge(clouds)
        keep = np.linalg.norm(merged.positions, axis=1) > 1e-6
        merged = merged.select(np.nonzero(keep)[0])
        all_ids = np.concatenate(ids)[keep]
        try:
            index = DirectionIndex(merged, ids=all_ids)
        except EmptyCloud:
            return [], []

        fusion_lines = []
        corrections = []
        R_lc = self.t_cl.inverse().rotation_matrix()
        for seg in segments:
            d_start = self.K_inv @ seg.xs_h
            d_end = self.K_inv @ seg.xe_h
            try:
                arc = VisualArc(sample_arc(d_start, d_end, self.arc_step),
                                segment_id=seg.descriptor_id)
            except LvslamError:
                continue
            assoc = associate_arc(arc, index, self.gate, self.cfg.fusion)
            if assoc.dominant == "planar":
                try:
                    fusion_lines.append(reconstruct_line_planar(
                        arc, assoc, config=self.cfg.fusion))
                except (InsufficientSupport, PoorPlaneFit, ParallelPlanes,
                        LvslamError):
                    continue
            elif assoc.dominant == "linear":
                try:
                    fl = reconstruct_line_linear(arc, assoc,
                                                 config=self.cfg.fusion)
                except (InsufficientSupport, NoDominantCluster, LvslamError):
                    continue
                fusion_lines.append(fl)
                current = assoc.point_ids[assoc.point_ids >= 0]
                linear_mask = np.isin(cloud.classes[current],
                                      [int(c) for c in LINEAR_CLASSES])
                members = np.unique(current[linear_mask])
                if len(members):
                    corrections.append(
                        (members, R_lc @ fl.mean_direction))
        return fusion_lines, corrections


def _merge(clouds):
    from .lidar.odometry import _concatenate
    return _concatenate(clouds, clouds[0].frame_id, clouds[0].timestamp)


def run_pipeline(config: PipelineConfig, output_dir=None, mode: str = "sim",
                 input_dir=None, world=None, schedule=None,
                 ground_truth=None, use_gt_deskew: bool = False,
                 write_outputs: bool = True) -> PipelineResult:
    """Drive the dual-odometry system over a synthetic or loaded sequence.

    Per-frame subsystem failures are recorded, never fatal. With an output
    directory the run writes traj_visual.txt, traj_lidar.txt,
    traj_system.txt, health.csv, and report.txt.
    """
    cfg = config
    sim = cfg.sim
    if mode not in ("sim", "dataset"):
        raise SourceError(f"unknown mode {mode!r}")
    if mode == "dataset":
        if input_dir is None:
            raise SourceError("dataset mode needs an input directory")
        input_dir = Path(input_dir)
        world = sim_io.read_world(input_dir / "world.txt")
        ground_truth = sim_io.read_trajectory(input_dir / "traj_gt_body.txt")
    else:
        if world is None:
            world = generate_scene(sim.preset, sim.seed)
    if ground_truth is None:
        ground_truth = preset_trajectory(sim.preset, sim.n_frames,
                                         sim.frame_dt)
    n_frames = len(ground_truth) - 1
    if schedule is None:
        schedule = DegradationSchedule.nominal(max(n_frames, 0))

    rng = np.random.default_rng(sim.seed)
    t_cl = lidar_camera_extrinsic(cfg)
    t_lc = t_cl.inverse()
    model = LidarModel(rings=sim.sweep_rings,
                       azimuth_step_deg=sim.sweep_azimuth_step_deg,
                       vertical_fov_deg=sim.sweep_vertical_fov_deg,
                       max_range=sim.max_range, min_range=sim.min_range)

    lidar = LidarOdometry(cfg.lidar, cfg.features)
    lidar.pose = lidar.prev_pose = ground_truth[0]
    camera_pose0 = ground_truth[0] @ t_lc
    visual = VisualOdometry(cfg.camera, cfg.visual, cfg.supervisor,
                            initial_pose=camera_pose0)
    fusion = FusionFrame(cfg)
    monitor = TrackingMonitor(cfg.supervisor)
    timeline = HealthTimeline()

    result = PipelineResult(
        visual_poses=[], lidar_poses=[], system=None, timeline=timeline,
        ground_truth_body=list(ground_truth),
        ground_truth_camera=[(p @ t_lc).with_timestamp(p.timestamp)
                             for p in ground_truth])

    for k in range(n_frames):
        entry = schedule.entry(k)
        gt_prev = ground_truth[k]
        gt_now = ground_truth[k + 1]
        stamp = gt_now.timestamp

        sweep = simulate_lidar(world, gt_prev, gt_now, model,
                               dropout=entry.lidar_dropout, rng=rng,
                               duration=sim.frame_dt, end_timestamp=stamp)
        camera_gt = (gt_now @ t_lc).with_timestamp(stamp)
        observation = simulate_camera(world, camera_gt, cfg.camera,
                                      noise_px=sim.pixel_noise,
                                      degradation=entry, rng=rng,
                                      frame_id=k, timestamp=stamp)

        # deskew with the constant-velocity prediction (or ground truth in
        # consistency-check mode), classify in the sensor frame
        if use_gt_deskew:
            deskew_pair = (gt_prev, gt_now)
        else:
            predicted = lidar.predict(stamp)
            deskew_pair = (lidar.pose, predicted)
        try:
            compensated = motion_compensate_sweep(sweep, *deskew_pair)
        except LvslamError as exc:
            result.errors.append((k, f"deskew: {exc}"))
            compensated = sweep.points
        if sim.lidar_noise > 0 and len(compensated):
            compensated = compensated + rng.normal(scale=sim.lidar_noise,
                                                   size=compensated.shape)
        features = None
        if len(compensated) >= 3:
            try:
                features = classify_points(compensated, cfg.features,
                                           time_offsets=sweep.time_offsets,
                                           frame_id=k, timestamp=stamp)
            except LvslamError as exc:
                result.errors.append((k, f"classify: {exc}"))

        segments = detect_lines(observation,
                                cfg.visual.min_segment_length_px)
        fusion_lines, corrections = [], []
        if features is not None and segments:
            # multi-frame accumulation: the local-map window joins the
            # current frame to densify association on the sphere
            map_camera = None
            if len(lidar.map) > 0:
                body = deskew_pair[1]
                to_camera = fusion.t_cl @ body.inverse()
                map_camera = lidar.map.merged.transformed(to_camera)
            try:
                fusion_lines, corrections = fusion.exchange(
                    segments, features, map_camera)
            except LvslamError as exc:
                result.errors.append((k, f"fusion: {exc}"))

        if features is not None:
            lidar.queue_corrections(corrections)
            track = lidar.track(features, lidar.predict(stamp))
            lidar_pose = track.pose.with_timestamp(stamp)
            if track.degraded:
                result.errors.append((k, "lidar: degraded to dead reckoning"))
        else:
            lidar_pose = lidar.predict(stamp)
            result.errors.append((k, "lidar: empty sweep"))
        result.lidar_poses.append(lidar_pose)

        visual_pose, status = visual.process_frame(
            observation, fusion_lines, timestamp=stamp)
        result.visual_poses.append(visual_pose)
        result.fusion_line_count += len(fusion_lines)
        result.correction_count += len(corrections)

        source = monitor.assess(status)
        timeline.append(HealthRecord(frame_id=k, status=status.state,
                                     point_inliers=status.point_inliers,
                                     line_inliers=status.line_inliers,
                                     source=source))

    if n_frames > 0:
        result.system = compose_trajectory(result.visual_poses,
                                           result.lidar_poses, timeline, t_lc)
    else:
        from .supervisor import SystemTrajectory
        result.system = SystemTrajectory()

    if write_outputs and output_dir is not None:
        _write_outputs(Path(output_dir), cfg, result)
    return result


def _write_outputs(out: Path, cfg: PipelineConfig,
                   result: PipelineResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    sim_io.write_trajectory(out / "traj_visual.txt", result.visual_poses)
    sim_io.write_trajectory(out / "traj_lidar.txt", result.lidar_poses)
    sim_io.write_trajectory(out / "traj_system.txt", result.system.poses())
    sim_io.write_health_csv(out / "health.csv", result.timeline.rows())
    sim_io.write_trajectory(out / "traj_gt_camera.txt",
                            result.ground_truth_camera[1:])

    sources = result.system.sources()
    # no wall-clock entries: identical runs must produce identical files
    lines = [
        "# lvslam report v1",
        f"frames {len(result.visual_poses)}",
        f"fusion_lines {result.fusion_line_count}",
        f"direction_corrections {result.correction_count}",
        f"visual_frames {sources.count('VISUAL')}",
        f"lidar_frames {sources.count('LIDAR')}",
        f"subsystem_errors {len(result.errors)}",
    ]
    if result.ground_truth_camera and result.system.entries:
        from .sim import evaluate_ate
        try:
            ate = evaluate_ate(result.system.poses(),
                               result.ground_truth_camera[1:])
            lines.append(f"ate_rmse_m {ate.rmse:.6f}")
            lines.append(f"ate_mean_m {ate.mean:.6f}")
        except LvslamError as exc:
            lines.append(f"ate_error {exc}")
    for k, msg in result.errors[:50]:
        lines.append(f"error frame {k}: {msg}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
