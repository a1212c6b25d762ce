"""LiDAR odometry: categorized ICP against a rolling local map.

Feature clouds register with point-to-line residuals for linear points,
point-to-plane for planar points, and point-to-point for vertices, with
correspondences gated by distance and restricted to matching categories.
The local map keeps a bounded window of frames in the world frame and
enforces the optimized-point rate bound alpha on every update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..config import LidarConfig
from ..errors import (
    Diverged,
    EmptyCloud,
    InvalidAlpha,
    NoCorrespondences,
    NonLinearPoint,
    UnknownPointId,
)
from ..geometry import Pose, so3_exp
from .features import (
    FeatureClass,
    FeatureCloud,
    LINEAR_CLASSES,
    PLANAR_CLASSES,
)

VERTEX_CLASSES = (FeatureClass.VERTEX,)


def correct_linear_directions(cloud: FeatureCloud, assignments) -> FeatureCloud:
    """Overwrite linear points' principal directions with fusion consensus.

    assignments: iterable of (point ids, mean direction) pairs. Each assigned
    point's e1 becomes the mean direction (sign-aligned with its previous
    e1) and its optimized flag is set; everything else is untouched.
    """
    out = cloud.select(np.arange(len(cloud)))
    linear = out.class_mask(LINEAR_CLASSES)
    for point_ids, direction in assignments:
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        for pid in np.atleast_1d(point_ids):
            pid = int(pid)
            if not 0 <= pid < len(out):
                raise UnknownPointId(f"point id {pid} outside cloud")
            if not linear[pid]:
                raise NonLinearPoint(f"point {pid} is not a linear feature")
            previous = out.principal_directions[pid]
            sign = 1.0 if np.dot(previous, direction) >= 0 else -1.0
            out.principal_directions[pid] = sign * direction
            out.optimized[pid] = True
    return out


@dataclass
class Registration:
    relative_pose: Pose
    inlier_counts: dict
    rms_residual: float
    iterations: int
    converged: bool = True
    residual_history: list = field(default_factory=list)


class _TargetIndex:
    """Per-category KD-trees over the target cloud."""

    def __init__(self, cloud: FeatureCloud):
        self.cloud = cloud
        self.trees = {}
        self.indices = {}
        for name, classes in (("linear", LINEAR_CLASSES),
                              ("planar", PLANAR_CLASSES),
                              ("vertex", VERTEX_CLASSES)):
            idx = np.nonzero(cloud.class_mask(classes))[0]
            if len(idx):
                self.trees[name] = cKDTree(cloud.positions[idx])
                self.indices[name] = idx

    def match(self, name, points, gate):
        if name not in self.trees:
            return np.zeros(len(points), dtype=bool), np.zeros(len(points), int)
        dists, local = self.trees[name].query(points)
        ok = dists <= gate
        return ok, self.indices[name][np.where(ok, local, 0)]


def _category_residuals(name, source_pts, target_cloud, target_idx):
    """Residual rows and their Jacobians wrt (dtheta, dt) for one category."""
    q = target_cloud.positions[target_idx]
    n = len(source_pts)
    if name == "linear":
        e1 = target_cloud.principal_directions[target_idx]
        diff = source_pts - q
        r = diff - np.einsum("ni,ni->n", diff, e1)[:, None] * e1
        proj = np.eye(3)[None] - np.einsum("ni,nj->nij", e1, e1)
        J_t = proj
    elif name == "planar":
        e3 = target_cloud.normals[target_idx]
        r = np.einsum("ni,ni->n", source_pts - q, e3)[:, None]
        J_t = e3[:, None, :]
    else:
        r = source_pts - q
        J_t = np.tile(np.eye(3)[None], (n, 1, 1))
    # d(p')/d(dtheta) = -skew(p'), chained through each residual's J_t
    sk = np.zeros((n, 3, 3))
    x, y, z = source_pts[:, 0], source_pts[:, 1], source_pts[:, 2]
    sk[:, 0, 1] = -z
    sk[:, 0, 2] = y
    sk[:, 1, 0] = z
    sk[:, 1, 2] = -x
    sk[:, 2, 0] = -y
    sk[:, 2, 1] = x
    J_theta = -np.einsum("nij,njk->nik", J_t, sk)
    return r, np.concatenate([J_theta, J_t], axis=2)


def icp_register(source: FeatureCloud, target: FeatureCloud, init: Pose,
                 config: LidarConfig | None = None) -> Registration:
    """Align a source feature cloud to a target with categorized ICP.

    Returns the pose T such that T(source) matches the target. Iterations
    re-associate, solve the linearized least squares, and are accepted only
    if the RMS residual does not increase; `diverge_after` consecutive
    non-improving proposals abort with Diverged.
    """
    cfg = config or LidarConfig()
    if len(source) == 0 or len(target) == 0:
        raise EmptyCloud("registration needs non-empty clouds")
    index = _TargetIndex(target)
    pose = init
    source_masks = {
        "linear": source.class_mask(LINEAR_CLASSES),
        "planar": source.class_mask(PLANAR_CLASSES),
        "vertex": source.class_mask(VERTEX_CLASSES),
    }

    def associate_and_rms(current: Pose):
        moved = current.transform(source.positions)
        total_sq = 0.0
        total_n = 0
        rows = []
        counts = {}
        for name, mask in source_masks.items():
            pts = moved[mask]
            if len(pts) == 0:
                continue
            ok, tgt = index.match(name, pts, cfg.icp_gate)
            counts[name] = int(ok.sum())
            if counts[name] == 0:
                continue
            r, J = _category_residuals(name, pts[ok], target, tgt[ok])
            rows.append((r, J))
            total_sq += float((r ** 2).sum())
            total_n += r.size
        if total_n == 0:
            raise NoCorrespondences("no gated correspondences in any category")
        return rows, np.sqrt(total_sq / total_n), counts

    rows, rms, counts = associate_and_rms(pose)
    history = [rms]
    bad_streak = 0
    iterations = 0
    lam = 1e-6
    for iterations in range(1, cfg.icp_max_iterations + 1):
        H = np.zeros((6, 6))
        g = np.zeros(6)
        for r, J in rows:
            H += np.einsum("nri,nrj->ij", J, J)
            g += np.einsum("nri,nr->i", J, r)
        accepted = False
        for _ in range(6):
            # adaptive damping keeps degenerate geometry (unconstrained
            # directions) from launching the pose along null modes
            damped = H + lam * np.diag(np.maximum(np.diag(H), 1e-6))
            delta = np.linalg.solve(damped, -g)
            step = Pose.from_rt(so3_exp(delta[:3]), delta[3:])
            candidate = step @ pose
            new_rows, new_rms, new_counts = associate_and_rms(candidate)
            if new_rms <= rms:
                accepted = True
                break
            lam *= 10.0
        if accepted:
            improvement = rms - new_rms
            pose, rows, rms, counts = candidate, new_rows, new_rms, new_counts
            history.append(rms)
            bad_streak = 0
            lam = max(lam / 3.0, 1e-9)
            if improvement < cfg.icp_tol:
                break
        else:
            bad_streak += 1
            if bad_streak >= cfg.diverge_after:
                raise Diverged(
                    f"{bad_streak} consecutive non-improving ICP proposals")

    return Registration(relative_pose=pose, inlier_counts=counts,
                        rms_residual=float(rms), iterations=iterations,
                        residual_history=history)


@dataclass
class LocalMap:
    """Rolling window of world-frame feature clouds feeding registration."""

    window: int = 5
    frames: list = field(default_factory=list)   # (frame id, FeatureCloud)
    merged: FeatureCloud = None

    def __len__(self) -> int:
        return 0 if self.merged is None else len(self.merged)

    @property
    def frame_ids(self) -> list:
        return [fid for fid, _ in self.frames]

    def optimized_rate(self) -> float:
        if self.merged is None or len(self.merged) == 0:
            return 0.0
        return float(self.merged.optimized.mean())


def _voxel_keep_indices(positions, voxel: float):
    """Deterministic voxel downsampling: lowest index per voxel wins."""
    if len(positions) == 0:
        return np.zeros(0, dtype=int)
    keys = np.floor(positions / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


def _concatenate(clouds, frame_id, timestamp) -> FeatureCloud:
    return FeatureCloud(
        positions=np.concatenate([c.positions for c in clouds]),
        eigenvalues=np.concatenate([c.eigenvalues for c in clouds]),
        principal_directions=np.concatenate([c.principal_directions
                                             for c in clouds]),
        normals=np.concatenate([c.normals for c in clouds]),
        linearity=np.concatenate([c.linearity for c in clouds]),
        planarity=np.concatenate([c.planarity for c in clouds]),
        curvature=np.concatenate([c.curvature for c in clouds]),
        classes=np.concatenate([c.classes for c in clouds]),
        time_offsets=np.concatenate([c.time_offsets for c in clouds]),
        optimized=np.concatenate([c.optimized for c in clouds]),
        frame_id=frame_id, timestamp=timestamp,
    )


def update_local_map(local_map: LocalMap, frame: FeatureCloud,
                     alpha: float, config: LidarConfig | None = None) -> LocalMap:
    """Insert a world-frame feature cloud and rebuild the merged map.

    The window keeps the newest `window` frames. Unoptimized points are
    voxel-downsampled; optimized points are kept unless their rate exceeds
    alpha, in which case they pass a coarser voxel filter and, if the rate
    still exceeds alpha, a deterministic highest-index trim enforces the
    bound exactly.
    """
    cfg = config or LidarConfig()
    if not 0.0 < alpha <= 1.0:
        raise InvalidAlpha(f"alpha must be in (0, 1], got {alpha}")
    frames = list(local_map.frames)
    frames.append((frame.frame_id, frame))
    while len(frames) > local_map.window:
        frames.pop(0)

    merged = _concatenate([c for _, c in frames], frame.frame_id,
                          frame.timestamp)
    unopt_idx = np.nonzero(~merged.optimized)[0]
    opt_idx = np.nonzero(merged.optimized)[0]
    keep_unopt = unopt_idx[_voxel_keep_indices(
        merged.positions[unopt_idx], cfg.voxel_unoptimized)]

    kept_u = len(keep_unopt)
    keep_opt = opt_idx
    if kept_u + len(keep_opt) > 0 and alpha < 1.0:
        if len(keep_opt) > alpha * (kept_u + len(keep_opt)):
            keep_opt = opt_idx[_voxel_keep_indices(
                merged.positions[opt_idx], cfg.voxel_optimized)]
        # exact bound: rate <= alpha  <=>  n_opt <= alpha*u/(1-alpha)
        limit = int(np.floor(alpha * kept_u / (1.0 - alpha)))
        if len(keep_opt) > limit:
            keep_opt = keep_opt[:limit]

    keep = np.sort(np.concatenate([keep_unopt, keep_opt]))
    out = LocalMap(window=local_map.window, frames=frames,
                   merged=merged.select(keep))
    return out


@dataclass
class LidarTrackResult:
    pose: Pose
    registration: Registration | None
    cloud_world: FeatureCloud
    degraded: bool = False


class LidarOdometry:
    """Sequential LiDAR worker: deskew, classify, correct, register, map."""

    def __init__(self, config: LidarConfig | None = None,
                 feature_config=None, alpha: float | None = None):
        from ..config import FeatureConfig
        self.cfg = config or LidarConfig()
        self.feature_cfg = feature_config or FeatureConfig()
        self.alpha = self.cfg.alpha if alpha is None else alpha
        self.map = LocalMap(window=self.cfg.map_window)
        self.pose = Pose.identity()
        self.prev_pose = Pose.identity()
        self.pending_corrections = []
        self.frame_count = 0

    def queue_corrections(self, assignments) -> None:
        self.pending_corrections.extend(assignments)

    def track(self, cloud: FeatureCloud, predicted: Pose) -> LidarTrackResult:
        """Track one classified (already deskewed) sensor-frame cloud."""
        if self.pending_corrections:
            cloud = correct_linear_directions(cloud, self.pending_corrections)
            self.pending_corrections = []
        degraded = False
        registration = None
        if len(self.map) == 0:
            pose = predicted
        else:
            try:
                registration = icp_register(cloud, self.map.merged, predicted,
                                            self.cfg)
                pose = registration.relative_pose
            except (NoCorrespondences, EmptyCloud):
                pose = predicted
                degraded = True
            except Diverged:
                pose = predicted
                degraded = True
        world_cloud = cloud.transformed(pose)
        world_cloud.frame_id = self.frame_count
        self.map = update_local_map(self.map, world_cloud, self.alpha, self.cfg)
        self.prev_pose = self.pose
        self.pose = pose
        self.frame_count += 1
        return LidarTrackResult(pose=pose, registration=registration,
                                cloud_world=world_cloud, degraded=degraded)

    def predict(self, timestamp: float | None = None) -> Pose:
        """Constant-velocity motion model from the last two poses."""
        motion = self.pose @ self.prev_pose.inverse()
        predicted = motion @ self.pose
        if timestamp is not None:
            predicted = predicted.with_timestamp(timestamp)
        return predicted
