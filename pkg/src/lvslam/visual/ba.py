"""Windowed bundle adjustment over poses, point landmarks, and 4-DoF lines.

Levenberg-Marquardt on the robustified cost

    sum rho_px(|point reprojection|) + sum rho_px(|segment reprojection|)
        + w_dir * sum rho_dir(sqrt(2 e_dir))   (only landmarks carrying d_fu)

where sqrt(2 e_dir) is the chordal distance between the unit directions, so
the squared direction block equals e_dir itself (quadratic in the angle;
squaring 1 - cos directly would be quartic and carry no curvature at zero).
Huber losses enter per residual block through IRLS weights. The first
keyframe is held fixed (gauge anchor); steps are accepted only when the true
robust cost decreases, so the cost is non-increasing across accepted
iterations. Note the remaining monocular gauge freedom: with one anchored
keyframe the global scale stays where the initialization put it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import VisualConfig
from ..errors import NotConverged, RankDeficient
from ..geometry import OrthonormalLineParam, Pose
from .ba_kernels import (
    DirectionBlocks,
    LineBlocks,
    PointBlocks,
    _batch_skew,
    scatter_normal_equations,
)


@dataclass
class BAResult:
    poses: dict                    # keyframe id -> Pose (camera-to-world)
    points: dict                   # point id -> (3,) position
    lines: dict                    # line id -> PluckerLine
    cost_history: list
    iterations: int
    converged: bool

    @property
    def final_cost(self) -> float:
        return self.cost_history[-1]


def _so3_exp_batch(phi):
    angle = np.linalg.norm(phi, axis=-1)
    K = _batch_skew(phi)
    K2 = np.einsum("nij,njk->nik", K, K)
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 1.0, np.sin(safe) / safe)[:, None, None]
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)[:, None, None]
    return np.eye(3)[None] + a * K + b * K2


def _block_cost_and_weights(norms, valid, delta, scale=1.0):
    """Huber cost sum and IRLS weights for a batch of block norms."""
    n = np.where(valid, norms, 0.0)
    quad = n <= delta
    cost = np.where(quad, 0.5 * n * n, delta * (n - 0.5 * delta))
    weights = np.where(quad, 1.0, delta / np.where(n > 0, n, 1.0))
    weights = np.where(valid, weights, 0.0)
    return scale * float(cost.sum()), scale * weights


class _Problem:
    """Array-form state plus the fixed observation structure."""

    def __init__(self, keyframes, points, lines, K, cfg, n_fixed):
        self.cfg = cfg
        self.K = np.asarray(K, dtype=float)
        self.kf_ids = [kf.id for kf in keyframes]
        self.pt_ids = [lm.id for lm in points]
        self.ln_ids = [lm.id for lm in lines]
        kf_index = {k: i for i, k in enumerate(self.kf_ids)}
        pt_index = {p: i for i, p in enumerate(self.pt_ids)}
        ln_index = {l: i for i, l in enumerate(self.ln_ids)}

        self.R = np.stack([kf.pose.inverse().rotation_matrix()
                           for kf in keyframes])
        self.t = np.stack([kf.pose.inverse().translation for kf in keyframes])
        self.points = (np.stack([lm.position for lm in points])
                       if points else np.zeros((0, 3)))
        params = [OrthonormalLineParam.from_line(lm.line) for lm in lines]
        self.U = (np.stack([p.U for p in params]) if params
                  else np.zeros((0, 3, 3)))
        self.w = np.array([p.w_angle for p in params])

        fixed = set(self.kf_ids[:n_fixed])
        cursor = 0
        self.kf_offsets = {}
        for kf_id in self.kf_ids:
            if kf_id in fixed:
                continue
            self.kf_offsets[kf_id] = cursor
            cursor += 6
        self.pt_offsets = {}
        for pid in self.pt_ids:
            self.pt_offsets[pid] = cursor
            cursor += 3
        self.ln_offsets = {}
        for lid in self.ln_ids:
            self.ln_offsets[lid] = cursor
            cursor += 4
        self.n_params = cursor

        pt_obs = [(kf_id, lm.id, uv) for lm in points
                  for kf_id, uv in lm.observations if kf_id in kf_index]
        ln_obs = [(kf_id, lm.id, seg.xs_h, seg.xe_h) for lm in lines
                  for kf_id, seg in lm.observations if kf_id in kf_index]
        dir_entries = [(lm.id, lm.fusion_direction) for lm in lines
                       if lm.fusion_direction is not None]
        self.rejected_blocks = 0
        pt_obs = self._gate(pt_obs, PointBlocks, kf_index, pt_index,
                            self.pt_offsets)
        ln_obs = self._gate(ln_obs, LineBlocks, kf_index, ln_index,
                            self.ln_offsets)
        self.pt_blocks = PointBlocks(pt_obs, kf_index, pt_index,
                                     self.kf_offsets, self.pt_offsets,
                                     self.K) if pt_obs else None
        self.ln_blocks = LineBlocks(ln_obs, kf_index, ln_index,
                                    self.kf_offsets, self.ln_offsets,
                                    self.K) if ln_obs else None
        self.dir_blocks = DirectionBlocks(dir_entries, ln_index,
                                          self.ln_offsets) if dir_entries else None
        self.n_blocks = len(pt_obs) + len(ln_obs) + len(dir_entries)

    def _gate(self, obs, block_cls, kf_index, lm_index, lm_offsets):
        """Drop observations grossly inconsistent with the initialization.

        Huber bounds the influence of moderate outliers, but its linear tails
        do not redescend: a single huge residual can still make surrendering
        a landmark globally optimal, so gross outliers are rejected at entry.
        """
        if not obs or self.cfg.ba_gate_px <= 0:
            return obs
        blocks = block_cls(obs, kf_index, lm_index, self.kf_offsets,
                           lm_offsets, self.K)
        if block_cls is PointBlocks:
            e, _, valid, _, _ = blocks.evaluate(self.R, self.t, self.points)
        else:
            e, valid, _ = blocks.evaluate(self.R, self.t, self.U, self.w)
        norms = np.linalg.norm(e, axis=1)
        keep = valid & (norms <= self.cfg.ba_gate_px)
        self.rejected_blocks += int((~keep).sum())
        return [o for o, k in zip(obs, keep) if k]

    def snapshot(self):
        return (self.R.copy(), self.t.copy(), self.points.copy(),
                self.U.copy(), self.w.copy())

    def restore(self, snap):
        self.R, self.t, self.points, self.U, self.w = \
            (a.copy() for a in snap)

    def apply_delta(self, delta):
        if self.kf_offsets:
            rows = np.array([i for i, k in enumerate(self.kf_ids)
                             if k in self.kf_offsets])
            offs = np.array([self.kf_offsets[self.kf_ids[i]] for i in rows])
            dtheta = delta[offs[:, None] + np.arange(3)]
            dt = delta[offs[:, None] + np.arange(3, 6)]
            self.R[rows] = np.einsum("nij,njk->nik", self.R[rows],
                                     _so3_exp_batch(dtheta))
            self.t[rows] += dt
        if self.pt_offsets:
            offs = np.array([self.pt_offsets[p] for p in self.pt_ids])
            self.points += delta[offs[:, None] + np.arange(3)]
        if self.ln_offsets:
            offs = np.array([self.ln_offsets[l] for l in self.ln_ids])
            du = delta[offs[:, None] + np.arange(3)]
            self.U = np.einsum("nij,njk->nik", self.U, _so3_exp_batch(du))
            self.w += delta[offs[:, None] + np.arange(3, 4)][:, 0]

    def evaluate(self, with_jacobian=False):
        cfg = self.cfg
        cost = 0.0
        H = np.zeros((self.n_params, self.n_params)) if with_jacobian else None
        g = np.zeros(self.n_params) if with_jacobian else None

        if self.pt_blocks is not None:
            e, p_c, valid, R, p = self.pt_blocks.evaluate(self.R, self.t,
                                                          self.points)
            norms = np.linalg.norm(e, axis=1)
            c, wts = _block_cost_and_weights(norms, valid, cfg.huber_pixels)
            cost += c
            if with_jacobian:
                J_pose, J_point = self.pt_blocks.jacobians(R, p, p_c, valid)
                sw = np.sqrt(wts)[:, None]
                r_w = sw * e
                scatter_normal_equations(
                    H, g,
                    [(self.pt_blocks.kf_off, sw[:, :, None] * J_pose),
                     (self.pt_blocks.pt_off, sw[:, :, None] * J_point)],
                    r_w)
        if self.ln_blocks is not None:
            e, valid, cache = self.ln_blocks.evaluate(self.R, self.t,
                                                      self.U, self.w)
            norms = np.linalg.norm(e, axis=1)
            c, wts = _block_cost_and_weights(norms, valid, cfg.huber_pixels)
            cost += c
            if with_jacobian:
                J_pose, J_line = self.ln_blocks.jacobians(cache)
                sw = np.sqrt(wts)[:, None]
                r_w = sw * e
                scatter_normal_equations(
                    H, g,
                    [(self.ln_blocks.kf_off, sw[:, :, None] * J_pose),
                     (self.ln_blocks.ln_off, sw[:, :, None] * J_line)],
                    r_w)
        if self.dir_blocks is not None and cfg.direction_weight > 0:
            r, valid, cache = self.dir_blocks.evaluate(self.U, self.w)
            c, wts = _block_cost_and_weights(r, valid, cfg.huber_direction,
                                             scale=cfg.direction_weight)
            cost += c
            if with_jacobian:
                J = self.dir_blocks.jacobians(cache, r)
                sw = np.sqrt(wts)[:, None]
                r_w = sw * r[:, None]
                scatter_normal_equations(
                    H, g, [(self.dir_blocks.ln_off, sw[:, :, None] * J)], r_w)
        if with_jacobian:
            return cost, H, g
        return cost

    def result(self, history, iterations, converged) -> BAResult:
        poses = {}
        for i, kf_id in enumerate(self.kf_ids):
            poses[kf_id] = Pose.from_rt(self.R[i], self.t[i]).inverse()
        lines = {}
        for i, lid in enumerate(self.ln_ids):
            lines[lid] = OrthonormalLineParam(self.U[i],
                                              float(self.w[i])).to_line()
        points = {pid: self.points[i].copy()
                  for i, pid in enumerate(self.pt_ids)}
        return BAResult(poses, points, lines, history, iterations, converged)


def bundle_adjust(keyframes: list, points: list, lines: list, K,
                  config: VisualConfig | None = None,
                  fixed_keyframes: int = 1) -> BAResult:
    """Jointly refine keyframe poses and landmarks over a window.

    keyframes: Keyframe list (poses camera-to-world); the first
    `fixed_keyframes` of them anchor the gauge. points / lines: landmark
    lists whose observations reference keyframe ids. Raises RankDeficient for
    an under-constrained window and NotConverged (with `.result` attached)
    when the iteration cap is hit before the cost settles.
    """
    cfg = config or VisualConfig()
    if len(keyframes) < 2:
        raise RankDeficient("bundle adjustment needs at least two keyframes")
    if not any(len(lm.observations) >= 2 for lm in list(points) + list(lines)):
        raise RankDeficient("no landmark with two or more observations")

    problem = _Problem(keyframes, points, lines, K, cfg,
                       max(1, fixed_keyframes))
    if problem.n_params == 0:
        raise RankDeficient("no free parameters in the window")
    if problem.n_blocks == 0:
        raise RankDeficient("no residual blocks in the window")

    cost = problem.evaluate()
    history = [cost]
    lam = 1e-4
    converged = False
    iterations = 0
    for iterations in range(1, cfg.ba_max_iterations + 1):
        cost, H, g = problem.evaluate(with_jacobian=True)
        snap = problem.snapshot()
        accepted = False
        delta = None
        for _ in range(8):
            # diagonal floor keeps zero-information parameters (e.g. fully
            # gated landmarks) harmlessly pinned at their initial values
            damped = H + lam * np.diag(np.maximum(np.diag(H), 1e-6))
            try:
                delta = np.linalg.solve(damped, -g)
            except np.linalg.LinAlgError as exc:
                raise RankDeficient("singular normal equations") from exc
            problem.apply_delta(delta)
            trial_cost = problem.evaluate()
            if trial_cost < cost:
                lam = max(lam / 3.0, 1e-10)
                accepted = True
                break
            problem.restore(snap)
            lam *= 10.0
            if lam > 1e12:
                break
        if not accepted:
            converged = True  # stalled: no descent direction improves the cost
            break
        history.append(trial_cost)
        if (cost - trial_cost <= 1e-8 * max(trial_cost, 1.0)
                or float(np.max(np.abs(delta))) < 1e-8):
            converged = True
            break

    result = problem.result(history, iterations, converged)
    if not converged:
        raise NotConverged(
            f"bundle adjustment hit the {cfg.ba_max_iterations}-iteration cap",
            result=result, final_cost=history[-1])
    return result
