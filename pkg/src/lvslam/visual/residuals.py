"""Measurement residuals and their analytic Jacobians.

Conventions used throughout the optimizer:

- Camera pose state is world-to-camera (R, t): p_c = R p_w + t. The
  retraction is R <- R exp(skew(dtheta)), t <- t + dt, with the 6-vector
  ordered (dtheta, dt).
- Line state is the 4-DoF orthonormal parameterization (U, w); the
  homogeneous world line is (m, d) = (cos w * u1, sin w * u2) and the
  retraction is U <- U exp(skew(du)), w <- w + dw.
- The line reprojection residual divides both endpoint incidences by the
  image-line normal magnitude, so it is invariant to positive rescaling of
  the homogeneous line.
- The direction residual compares the world-frame line direction against a
  fixed fusion direction and is pose-independent.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateImageLine, ZeroVector
from ..geometry import line_projection_matrix, skew


def reprojection_residual(segment, image_line) -> np.ndarray:
    """Signed point-line pixel distances of both segment endpoints.

    e = [xs . l, xe . l] / sqrt(l1^2 + l2^2) for homogeneous endpoints.
    """
    l = np.asarray(image_line, dtype=float)
    n = np.hypot(l[0], l[1])
    if n < 1e-12:
        raise DegenerateImageLine("image line has zero normal part")
    return np.array([segment.xs_h @ l, segment.xe_h @ l]) / n


def direction_residual(d_cam, d_fu) -> float:
    """1 - cos(angle between the two directions); 0 iff parallel.

    Invariant to positive rescaling of either argument.
    """
    d_cam = np.asarray(d_cam, dtype=float)
    d_fu = np.asarray(d_fu, dtype=float)
    na, nb = np.linalg.norm(d_cam), np.linalg.norm(d_fu)
    if na < 1e-12 or nb < 1e-12:
        raise ZeroVector("direction residual of a zero vector")
    return float(1.0 - (d_cam @ d_fu) / (na * nb))


# --- homogeneous line plumbing ---

def line_world_from_param(U, w_angle):
    """Homogeneous world line (m, d) = (cos w * u1, sin w * u2)."""
    return np.cos(w_angle) * U[:, 0], np.sin(w_angle) * U[:, 1]


def line_world_to_camera(R, t, m_w, d_w):
    d_c = R @ d_w
    return R @ m_w + np.cross(t, d_c), d_c


def _image_line_terms(K_line, m_c, xs_h, xe_h):
    l = K_line @ m_c
    n = np.hypot(l[0], l[1])
    if n < 1e-12:
        raise DegenerateImageLine("projected line has zero normal part")
    e = np.array([xs_h @ l, xe_h @ l]) / n
    # d e_k / d l = x_k/n - (x_k.l) (l1, l2, 0) / n^3
    grad_n = np.array([l[0], l[1], 0.0]) / n
    de_dl = np.stack([xs_h / n - (xs_h @ l) * grad_n / n**2,
                      xe_h / n - (xe_h @ l) * grad_n / n**2])
    return e, de_dl


def segment_residual(R, t, U, w_angle, K, xs_h, xe_h):
    """e_dis for a parameterized world line seen by a world-to-camera (R, t)."""
    m_w, d_w = line_world_from_param(U, w_angle)
    m_c, _ = line_world_to_camera(R, t, m_w, d_w)
    e, _ = _image_line_terms(line_projection_matrix(K), m_c, xs_h, xe_h)
    return e


def segment_residual_jacobians(R, t, U, w_angle, K, xs_h, xe_h):
    """(e, J_pose (2x6), J_line (2x4)) of the line reprojection residual."""
    m_w, d_w = line_world_from_param(U, w_angle)
    m_c, _ = line_world_to_camera(R, t, m_w, d_w)
    K_line = line_projection_matrix(K)
    e, de_dl = _image_line_terms(K_line, m_c, xs_h, xe_h)
    de_dmc = de_dl @ K_line                       # (2, 3)

    tx = skew(t)
    # pose: m_c = R exp(du) m_w + skew(t) R exp(du) d_w, t additive
    dmc_dtheta = -R @ skew(m_w) - tx @ R @ skew(d_w)
    dmc_dt = -skew(R @ d_w)
    J_pose = np.hstack([de_dmc @ dmc_dtheta, de_dmc @ dmc_dt])

    # line: derivatives of (m_w, d_w) wrt (du, dw)
    cw, sw = np.cos(w_angle), np.sin(w_angle)
    u1, u2, u3 = U[:, 0], U[:, 1], U[:, 2]
    dmw = np.zeros((3, 4))
    ddw = np.zeros((3, 4))
    dmw[:, 1] = -cw * u3
    dmw[:, 2] = cw * u2
    dmw[:, 3] = -sw * u1
    ddw[:, 0] = sw * u3
    ddw[:, 2] = -sw * u1
    ddw[:, 3] = cw * u2
    dmc_dline = R @ dmw + tx @ (R @ ddw)
    J_line = de_dmc @ dmc_dline
    return e, J_pose, J_line


def direction_residual_from_param(U, w_angle, d_fu) -> float:
    _, d_w = line_world_from_param(U, w_angle)
    return direction_residual(d_w, d_fu)


def _ddw_dparam(U, w_angle):
    cw, sw = np.cos(w_angle), np.sin(w_angle)
    u1, u2, u3 = U[:, 0], U[:, 1], U[:, 2]
    ddw = np.zeros((3, 4))
    ddw[:, 0] = sw * u3
    ddw[:, 2] = -sw * u1
    ddw[:, 3] = cw * u2
    return ddw


def direction_residual_jacobian(U, w_angle, d_fu):
    """(e_dir, J_line (1x4)); the pose Jacobian is identically zero."""
    d_fu = np.asarray(d_fu, dtype=float)
    _, d_w = line_world_from_param(U, w_angle)
    na = np.linalg.norm(d_w)
    nb = np.linalg.norm(d_fu)
    if na < 1e-12 or nb < 1e-12:
        raise ZeroVector("direction residual of a zero vector")
    e = 1.0 - float(d_w @ d_fu) / (na * nb)
    de_dd = -(d_fu / (na * nb) - (d_w @ d_fu) * d_w / (na**3 * nb))
    return e, (de_dd @ _ddw_dparam(U, w_angle))[None, :]


def direction_chordal_jacobian(U, w_angle, d_fu):
    """Chordal direction block used inside the optimizer.

    r = |d_cam/|d_cam| - d_fu| satisfies r^2 = 2 e_dir, so squaring this
    residual reproduces Eq.-4-style alignment with proper quadratic curvature
    near zero (squaring 1 - cos itself would be quartic in the angle).
    Returns (r, J_line (1x4)).
    """
    d_fu = np.asarray(d_fu, dtype=float)
    d_fu = d_fu / np.linalg.norm(d_fu)
    _, d_w = line_world_from_param(U, w_angle)
    na = np.linalg.norm(d_w)
    if na < 1e-12:
        raise ZeroVector("direction residual of a zero vector")
    u = d_w / na
    diff = u - d_fu
    r = float(np.linalg.norm(diff))
    if r < 1e-12:
        return 0.0, np.zeros((1, 4))
    du_dd = (np.eye(3) - np.outer(u, u)) / na
    dr_dd = (diff / r) @ du_dd
    return r, (dr_dd @ _ddw_dparam(U, w_angle))[None, :]


# --- point features ---

def project_point(R, t, K, p_w):
    p_c = R @ p_w + t
    if p_c[2] <= 1e-9:
        raise ValueError("point behind the camera")
    return np.array([K[0, 0] * p_c[0] / p_c[2] + K[0, 2],
                     K[1, 1] * p_c[1] / p_c[2] + K[1, 2]])


def point_residual(R, t, K, p_w, uv):
    return project_point(R, t, K, p_w) - np.asarray(uv, dtype=float)


def point_residual_jacobians(R, t, K, p_w, uv):
    """(e, J_pose (2x6), J_point (2x3)) of the point reprojection residual."""
    p_c = R @ p_w + t
    x, y, z = p_c
    if z <= 1e-9:
        raise ValueError("point behind the camera")
    fx, fy = K[0, 0], K[1, 1]
    e = np.array([fx * x / z + K[0, 2] - uv[0], fy * y / z + K[1, 2] - uv[1]])
    dpi = np.array([[fx / z, 0.0, -fx * x / z**2],
                    [0.0, fy / z, -fy * y / z**2]])
    J_pose = np.hstack([dpi @ (-R @ skew(p_w)), dpi])
    J_point = dpi @ R
    return e, J_pose, J_point
