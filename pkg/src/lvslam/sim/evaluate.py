"""Trajectory evaluation: absolute trajectory error after alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientOverlap


@dataclass
class AteResult:
    rmse: float
    mean: float
    errors: np.ndarray          # per-matched-frame translation errors
    n_matched: int
    scale: float = 1.0


def associate_by_time(stamps_a, stamps_b, max_dt: float = 0.01):
    """Nearest-neighbor timestamp pairs within max_dt; greedy on sorted b."""
    pairs = []
    j = 0
    stamps_b = np.asarray(stamps_b)
    for i, t in enumerate(stamps_a):
        k = int(np.argmin(np.abs(stamps_b - t)))
        if abs(stamps_b[k] - t) <= max_dt:
            pairs.append((i, k))
    return pairs


def umeyama(source, target, with_scale: bool = False):
    """Closed-form (s, R, t) minimizing |target - (s R source + t)|^2."""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    sc = source - mu_s
    tc = target - mu_t
    cov = tc.T @ sc / len(source)
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var = (sc ** 2).sum() / len(source)
        s = float(np.trace(np.diag(D) @ S) / var) if var > 0 else 1.0
    else:
        s = 1.0
    t = mu_t - s * R @ mu_s
    return s, R, t


def evaluate_ate(estimate, ground_truth, max_dt: float = 0.01,
                 align: str = "rigid") -> AteResult:
    """Aligned translation error between two timestamped pose lists.

    `align` is "rigid" (default), "similarity" (adds scale), or "none".
    Poses are associated by nearest timestamp within max_dt; fewer than 3
    common frames raises InsufficientOverlap.
    """
    est_stamps = [p.timestamp for p in estimate]
    gt_stamps = [p.timestamp for p in ground_truth]
    pairs = associate_by_time(est_stamps, gt_stamps, max_dt)
    if len(pairs) < 3:
        raise InsufficientOverlap(
            f"{len(pairs)} common timestamps; need at least 3")
    est = np.array([estimate[i].translation for i, _ in pairs])
    gt = np.array([ground_truth[j].translation for _, j in pairs])
    if align == "none":
        s, R, t = 1.0, np.eye(3), np.zeros(3)
    elif align in ("rigid", "similarity"):
        s, R, t = umeyama(est, gt, with_scale=(align == "similarity"))
    else:
        raise ValueError(f"unknown alignment mode {align!r}")
    aligned = (s * (R @ est.T)).T + t
    errors = np.linalg.norm(aligned - gt, axis=1)
    return AteResult(rmse=float(np.sqrt(np.mean(errors ** 2))),
                     mean=float(errors.mean()), errors=errors,
                     n_matched=len(pairs), scale=float(s))
