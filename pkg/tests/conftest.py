"""Shared synthetic-scene builders for optimizer and pipeline tests."""

import numpy as np

from lvslam.geometry import PluckerLine, Pose, quat_from_axis_angle
from lvslam.visual import Keyframe, LineLandmark, PointLandmark, Segment2D
from lvslam.visual.landmarks import TRIANGULATED
from lvslam.visual.residuals import project_point

K_TEST = np.array([[320.0, 0.0, 320.0],
                   [0.0, 320.0, 240.0],
                   [0.0, 0.0, 1.0]])


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def perturbed_pose(pose, rng, sigma_t=0.05, sigma_deg=1.0):
    axis = random_unit(rng)
    angle = np.radians(sigma_deg) * rng.normal()
    dq = quat_from_axis_angle(axis, angle)
    from lvslam.geometry import quat_multiply
    return Pose(quat_multiply(pose.rotation, dq),
                pose.translation + rng.normal(scale=sigma_t, size=3),
                pose.timestamp)


def build_ba_scene(seed=0, n_keyframes=10, n_lines=20, n_points=15,
                   pixel_noise=0.0, obs_window=None, track_length=2.0):
    """Camera translating along +x looking down +z at a box of landmarks.

    Returns (keyframes at ground truth, line landmarks, point landmarks,
    ground-truth lines dict, ground-truth points dict, rng).
    """
    rng = np.random.default_rng(seed)
    gt_poses = []
    for k in range(n_keyframes):
        x = track_length * k / max(1, n_keyframes - 1)
        yaw = 0.1 * np.sin(2 * np.pi * k / max(1, n_keyframes - 1))
        pose = Pose(quat_from_axis_angle([0, 1, 0], yaw),
                    np.array([x, 0.05 * np.sin(3.0 * k), 0.0]), timestamp=float(k))
        gt_poses.append(pose)
    keyframes = [Keyframe(id=k, pose=p, timestamp=float(k))
                 for k, p in enumerate(gt_poses)]

    gt_lines = {}
    line_landmarks = []
    for i in range(n_lines):
        mid = np.array([rng.uniform(-1.5, track_length + 1.5),
                        rng.uniform(-1.2, 1.2), rng.uniform(3.0, 6.0)])
        d = random_unit(rng)
        half = rng.uniform(0.4, 1.0)
        a, b = mid - half * d, mid + half * d
        line = PluckerLine.from_endpoints(a, b)
        gt_lines[i] = line
        lm = LineLandmark(id=i, line=line, source=TRIANGULATED)
        for kf in keyframes:
            if obs_window is not None and not (
                    obs_window[0] <= kf.id - i % n_keyframes <= obs_window[1]):
                continue
            seg = project_segment(kf.pose, a, b, pixel_noise, rng, descriptor=i)
            if seg is not None:
                lm.add_observation(kf.id, seg)
        if len(lm.observations) >= 2:
            line_landmarks.append(lm)

    gt_points = {}
    point_landmarks = []
    for i in range(n_points):
        p = np.array([rng.uniform(-1.5, track_length + 1.5),
                      rng.uniform(-1.2, 1.2), rng.uniform(3.0, 6.0)])
        gt_points[i] = p
        lm = PointLandmark(id=i, position=p.copy())
        for kf in keyframes:
            uv = safe_project(kf.pose, p)
            if uv is None:
                continue
            if pixel_noise:
                uv = uv + rng.normal(scale=pixel_noise, size=2)
            lm.observations.append((kf.id, uv))
        if len(lm.observations) >= 2:
            point_landmarks.append(lm)

    return keyframes, line_landmarks, point_landmarks, gt_lines, gt_points, rng


def safe_project(pose, p_w, margin=200.0):
    inv = pose.inverse()
    R, t = inv.rotation_matrix(), inv.translation
    p_c = R @ p_w + t
    if p_c[2] < 0.5:
        return None
    uv = project_point(R, t, K_TEST, p_w)
    if not (-margin <= uv[0] <= 640 + margin and -margin <= uv[1] <= 480 + margin):
        return None
    return uv


def project_segment(pose, a, b, pixel_noise, rng, descriptor=-1):
    ua = safe_project(pose, a)
    ub = safe_project(pose, b)
    if ua is None or ub is None:
        return None
    if pixel_noise:
        ua = ua + rng.normal(scale=pixel_noise, size=2)
        ub = ub + rng.normal(scale=pixel_noise, size=2)
    if np.linalg.norm(ub - ua) < 5.0:
        return None
    return Segment2D(ua, ub, descriptor_id=descriptor)


def build_drift_scene(seed, n_kf=50, n_lines=60, n_points=12, line_vis=8,
                      pt_vis=8, px_noise=1.0, seg_noise=0.5, bias_deg=2.0,
                      depth=(2.0, 4.0), track=5.0, fusion_frac=1.0):
    """Odometry-style window benchmark: short landmark tracks, yawing camera.

    Line landmarks initialize with biased triangulations (direction rotated
    by bias_deg, midpoint offset) and carry the true direction as d_fu;
    points form a windowed relative backbone. Poses start at ground truth.
    Returns (keyframes, line landmarks, point landmarks).
    """
    from lvslam.geometry import so3_exp
    from lvslam.visual.landmarks import TRIANGULATED

    rng = np.random.default_rng(seed)
    kfs = []
    for k in range(n_kf):
        x = track * k / (n_kf - 1)
        yaw = 0.25 * np.sin(2 * np.pi * k / (n_kf - 1))
        kfs.append(Keyframe(
            id=k,
            pose=Pose(quat_from_axis_angle([0, 1, 0], yaw),
                      np.array([x, 0.03 * np.sin(2.3 * k),
                                0.1 * np.sin(1.3 * k)]), float(k)),
            timestamp=float(k)))
    lines = []
    for i in range(n_lines):
        start = int(round(i * (n_kf - line_vis) / max(1, n_lines - 1)))
        anchor = kfs[min(start + line_vis // 2, n_kf - 1)].pose
        mid = anchor.transform(np.array([rng.uniform(-0.8, 0.8),
                                         rng.uniform(-0.7, 0.7),
                                         rng.uniform(*depth)]))
        d = random_unit(rng)
        half = rng.uniform(0.6, 1.2)
        a, b = mid - half * d, mid + half * d
        axis = rng.normal(size=3)
        axis -= axis.dot(d) * d
        axis /= np.linalg.norm(axis)
        d_biased = so3_exp(np.radians(bias_deg) * axis) @ d
        mid_biased = mid + rng.normal(scale=0.02, size=3)
        lm = LineLandmark(
            id=i, line=PluckerLine.from_endpoints(mid_biased - half * d_biased,
                                                  mid_biased + half * d_biased),
            source=TRIANGULATED)
        for k in range(start, min(start + line_vis, n_kf)):
            seg = project_segment(kfs[k].pose, a, b, seg_noise, rng, descriptor=i)
            if seg is not None:
                lm.add_observation(k, seg)
        if len(lm.observations) >= 2:
            if rng.random() < fusion_frac:
                lm.attach_fusion_direction(d)
            lines.append(lm)
    points = []
    for i in range(n_points):
        start = int(round(i * (n_kf - pt_vis) / max(1, n_points - 1)))
        anchor = kfs[min(start + pt_vis // 2, n_kf - 1)].pose
        p = anchor.transform(np.array([rng.uniform(-0.8, 0.8),
                                       rng.uniform(-0.7, 0.7),
                                       rng.uniform(*depth)]))
        lm = PointLandmark(id=i, position=p + rng.normal(scale=0.03, size=3))
        for k in range(start, min(start + pt_vis, n_kf)):
            uv = safe_project(kfs[k].pose, p)
            if uv is not None:
                lm.observations.append((k, uv + rng.normal(scale=px_noise,
                                                           size=2)))
        if len(lm.observations) >= 2:
            points.append(lm)
    return kfs, lines, points


def aligned_pose_rmse(result, keyframes, with_scale=True):
    """ATE-style RMSE of optimized poses against ground truth."""
    est = np.array([result.poses[kf.id].translation for kf in keyframes])
    gt = np.array([kf.pose.translation for kf in keyframes])
    s, R, t = umeyama_align(est, gt, with_scale=with_scale)
    return float(np.sqrt(np.mean(np.sum(((s * (R @ est.T)).T + t - gt) ** 2,
                                        axis=1))))


def umeyama_align(estimate, truth, with_scale=True):
    """Closed-form similarity alignment (oracle-grade, kept test-local).

    Returns (s, R, t) minimizing |truth - (s R estimate + t)|^2.
    """
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(truth, dtype=float)
    mu_e, mu_r = est.mean(axis=0), ref.mean(axis=0)
    ec, rc = est - mu_e, ref - mu_r
    cov = rc.T @ ec / len(est)
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var = (ec ** 2).sum() / len(est)
        s = float(np.trace(np.diag(D) @ S) / var) if var > 0 else 1.0
    else:
        s = 1.0
    t = mu_r - s * R @ mu_e
    return s, R, t
