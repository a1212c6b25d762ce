"""Batched residual/Jacobian evaluation for the bundle adjuster.

Observation structure is fixed over an optimization run, so gather indices
are computed once; each evaluation re-derives all residual blocks of one
type with stacked numpy ops and scatter-adds the weighted normal-equation
contributions with np.add.at.
"""

from __future__ import annotations

import numpy as np

from ..geometry import line_projection_matrix


def _batch_skew(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


class PointBlocks:
    """All point-reprojection observations, batched."""

    def __init__(self, obs, kf_index, pt_index, kf_offsets, pt_offsets, K):
        # obs: list of (kf_id, pt_id, uv)
        self.kf_rows = np.array([kf_index[o[0]] for o in obs], dtype=int)
        self.pt_rows = np.array([pt_index[o[1]] for o in obs], dtype=int)
        self.uv = np.array([o[2] for o in obs], dtype=float)
        self.kf_off = np.array([kf_offsets.get(o[0], -1) for o in obs], dtype=int)
        self.pt_off = np.array([pt_offsets.get(o[1], -1) for o in obs], dtype=int)
        self.fx, self.fy = K[0, 0], K[1, 1]
        self.cx, self.cy = K[0, 2], K[1, 2]

    def __len__(self):
        return len(self.uv)

    def evaluate(self, R_stack, t_stack, points):
        """Residuals (N,2), camera points (N,3), and validity mask."""
        R = R_stack[self.kf_rows]
        t = t_stack[self.kf_rows]
        p = points[self.pt_rows]
        p_c = np.einsum("nij,nj->ni", R, p) + t
        valid = p_c[:, 2] > 1e-9
        z = np.where(valid, p_c[:, 2], 1.0)
        e = np.stack([self.fx * p_c[:, 0] / z + self.cx - self.uv[:, 0],
                      self.fy * p_c[:, 1] / z + self.cy - self.uv[:, 1]], axis=1)
        return e, p_c, valid, R, p

    def jacobians(self, R, p, p_c, valid):
        """(J_pose (N,2,6), J_point (N,2,3))."""
        z = np.where(valid, p_c[:, 2], 1.0)
        dpi = np.zeros((len(self), 2, 3))
        dpi[:, 0, 0] = self.fx / z
        dpi[:, 0, 2] = -self.fx * p_c[:, 0] / z**2
        dpi[:, 1, 1] = self.fy / z
        dpi[:, 1, 2] = -self.fy * p_c[:, 1] / z**2
        J_point = np.einsum("nij,njk->nik", dpi, R)
        J_theta = np.einsum("nij,njk->nik", J_point, -_batch_skew(p))
        return np.concatenate([J_theta, dpi], axis=2), J_point


class LineBlocks:
    """All segment-reprojection observations, batched."""

    def __init__(self, obs, kf_index, ln_index, kf_offsets, ln_offsets, K):
        # obs: list of (kf_id, ln_id, xs_h, xe_h)
        self.kf_rows = np.array([kf_index[o[0]] for o in obs], dtype=int)
        self.ln_rows = np.array([ln_index[o[1]] for o in obs], dtype=int)
        self.xs = np.array([o[2] for o in obs], dtype=float)
        self.xe = np.array([o[3] for o in obs], dtype=float)
        self.kf_off = np.array([kf_offsets.get(o[0], -1) for o in obs], dtype=int)
        self.ln_off = np.array([ln_offsets.get(o[1], -1) for o in obs], dtype=int)
        self.K_line = line_projection_matrix(K)

    def __len__(self):
        return len(self.xs)

    def _line_world(self, U_stack, w_stack):
        cw = np.cos(w_stack)[:, None]
        sw = np.sin(w_stack)[:, None]
        return cw * U_stack[:, :, 0], sw * U_stack[:, :, 1]

    def evaluate(self, R_stack, t_stack, U_stack, w_stack):
        R = R_stack[self.kf_rows]
        t = t_stack[self.kf_rows]
        U = U_stack[self.ln_rows]
        w = w_stack[self.ln_rows]
        m_w, d_w = self._line_world(U, w)
        Rd = np.einsum("nij,nj->ni", R, d_w)
        m_c = np.einsum("nij,nj->ni", R, m_w) + np.cross(t, Rd)
        l = m_c @ self.K_line.T
        n = np.hypot(l[:, 0], l[:, 1])
        valid = n > 1e-12
        n = np.where(valid, n, 1.0)
        e = np.stack([np.einsum("ni,ni->n", self.xs, l) / n,
                      np.einsum("ni,ni->n", self.xe, l) / n], axis=1)
        cache = (R, t, U, w, m_w, d_w, l, n)
        return e, valid, cache

    def jacobians(self, cache):
        R, t, U, w, m_w, d_w, l, n = cache
        N = len(self)
        # de/dl per endpoint: x/n - (x.l) (l1,l2,0)/n^3
        grad_n = np.zeros((N, 3))
        grad_n[:, 0] = l[:, 0] / n
        grad_n[:, 1] = l[:, 1] / n
        de_dl = np.zeros((N, 2, 3))
        for row, x in ((0, self.xs), (1, self.xe)):
            xl = np.einsum("ni,ni->n", x, l)
            de_dl[:, row, :] = x / n[:, None] - xl[:, None] * grad_n / (n**2)[:, None]
        de_dmc = np.einsum("nij,jk->nik", de_dl, self.K_line)

        tx = _batch_skew(t)
        txR = np.einsum("nij,njk->nik", tx, R)
        dmc_dtheta = -np.einsum("nij,njk->nik", R, _batch_skew(m_w)) \
            - np.einsum("nij,njk->nik", txR, _batch_skew(d_w))
        Rd = np.einsum("nij,nj->ni", R, d_w)
        dmc_dt = -_batch_skew(Rd)
        J_pose = np.concatenate([np.einsum("nij,njk->nik", de_dmc, dmc_dtheta),
                                 np.einsum("nij,njk->nik", de_dmc, dmc_dt)], axis=2)

        cw = np.cos(w)[:, None]
        sw = np.sin(w)[:, None]
        u1, u2, u3 = U[:, :, 0], U[:, :, 1], U[:, :, 2]
        dmw = np.zeros((N, 3, 4))
        ddw = np.zeros((N, 3, 4))
        dmw[:, :, 1] = -cw * u3
        dmw[:, :, 2] = cw * u2
        dmw[:, :, 3] = -sw * u1
        ddw[:, :, 0] = sw * u3
        ddw[:, :, 2] = -sw * u1
        ddw[:, :, 3] = cw * u2
        dmc_dline = np.einsum("nij,njk->nik", R, dmw) \
            + np.einsum("nij,njk->nik", txR, ddw)
        J_line = np.einsum("nij,njk->nik", de_dmc, dmc_dline)
        return J_pose, J_line


class DirectionBlocks:
    """All chordal direction priors, batched."""

    def __init__(self, entries, ln_index, ln_offsets):
        # entries: list of (ln_id, d_fu)
        self.ln_rows = np.array([ln_index[e[0]] for e in entries], dtype=int)
        d = np.array([e[1] for e in entries], dtype=float)
        self.d_fu = d / np.linalg.norm(d, axis=1, keepdims=True)
        self.ln_off = np.array([ln_offsets.get(e[0], -1) for e in entries],
                               dtype=int)

    def __len__(self):
        return len(self.ln_rows)

    def evaluate(self, U_stack, w_stack):
        U = U_stack[self.ln_rows]
        w = w_stack[self.ln_rows]
        sw = np.sin(w)[:, None]
        d_w = sw * U[:, :, 1]
        na = np.linalg.norm(d_w, axis=1)
        valid = na > 1e-12
        na = np.where(valid, na, 1.0)
        u = d_w / na[:, None]
        diff = u - self.d_fu
        r = np.linalg.norm(diff, axis=1)
        return r, valid, (U, w, d_w, na, u, diff)

    def jacobians(self, cache, r):
        U, w, d_w, na, u, diff = cache
        N = len(self)
        safe_r = np.where(r > 1e-12, r, 1.0)
        # dr/dd_w = (diff/r) (I - u u^T)/na
        du = (np.eye(3)[None] - np.einsum("ni,nj->nij", u, u)) / na[:, None, None]
        dr_dd = np.einsum("ni,nij->nj", diff / safe_r[:, None], du)
        cw = np.cos(w)[:, None]
        sw = np.sin(w)[:, None]
        u1, u3 = U[:, :, 0], U[:, :, 2]
        ddw = np.zeros((N, 3, 4))
        ddw[:, :, 0] = sw * u3
        ddw[:, :, 2] = -sw * u1
        ddw[:, :, 3] = cw * U[:, :, 1]
        J = np.einsum("ni,nij->nj", dr_dd, ddw)[:, None, :]
        J[r <= 1e-12] = 0.0
        return J


def scatter_normal_equations(H, g, entries, r_w):
    """Accumulate J^T J and J^T r for a batch of blocks.

    entries: list of (offsets (N,), J (N, rdim, pdim)) pairs; offsets of -1
    mark fixed parameters and are skipped. r_w: (N, rdim) weighted residuals.
    """
    for off_i, J_i in entries:
        live_i = off_i >= 0
        if not np.any(live_i):
            continue
        gi = np.einsum("nij,ni->nj", J_i[live_i], r_w[live_i])
        pdim_i = J_i.shape[2]
        idx_i = off_i[live_i][:, None] + np.arange(pdim_i)[None, :]
        np.add.at(g, idx_i.ravel(), gi.ravel())
        for off_j, J_j in entries:
            live = live_i & (off_j >= 0)
            if not np.any(live):
                continue
            Hij = np.einsum("nri,nrj->nij", J_i[live], J_j[live])
            pdim_j = J_j.shape[2]
            rows = (off_i[live][:, None, None]
                    + np.arange(pdim_i)[None, :, None])
            cols = (off_j[live][:, None, None]
                    + np.arange(pdim_j)[None, None, :])
            flat = rows * H.shape[1] + cols
            np.add.at(H.reshape(-1), flat.ravel(), Hij.ravel())
