"""Point-cloud geometric feature classification via local PCA.

Each point's neighborhood covariance yields eigenvalues l1 >= l2 >= l3 and
the descriptors linearity (l1-l2)/l1, planarity (l2-l3)/l1, and curvature
l3/(l1+l2+l3). Points are then labeled as one of five geometric classes:
pillar/beam (vertical/horizontal linear), facade/roof (vertical/horizontal
planar), or vertex (isolated high-curvature), falling back to unclassified.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..config import FeatureConfig
from ..errors import EmptyCloud, TooFewNeighbors


class FeatureClass(enum.IntEnum):
    UNCLASSIFIED = 0
    VERTEX = 1
    PILLAR = 2
    BEAM = 3
    FACADE = 4
    ROOF = 5


LINEAR_CLASSES = (FeatureClass.PILLAR, FeatureClass.BEAM)
PLANAR_CLASSES = (FeatureClass.FACADE, FeatureClass.ROOF)


@dataclass(frozen=True)
class FeaturePoint:
    """Single-point view of a FeatureCloud row."""

    position: np.ndarray
    eigenvalues: np.ndarray      # descending (l1, l2, l3)
    principal_direction: np.ndarray  # e1
    normal: np.ndarray               # e3
    linearity: float
    planarity: float
    curvature: float
    feature_class: FeatureClass
    time_offset: float = 0.0


@dataclass
class FeatureCloud:
    """Struct-of-arrays feature cloud; all rows share one frame and timestamp."""

    positions: np.ndarray                    # (N, 3)
    eigenvalues: np.ndarray                  # (N, 3) descending
    principal_directions: np.ndarray         # (N, 3) e1
    normals: np.ndarray                      # (N, 3) e3
    linearity: np.ndarray                    # (N,)
    planarity: np.ndarray                    # (N,)
    curvature: np.ndarray                    # (N,)
    classes: np.ndarray                      # (N,) int8 FeatureClass values
    time_offsets: np.ndarray                 # (N,)
    optimized: np.ndarray = None             # (N,) bool, direction corrected
    frame_id: int = 0
    timestamp: float = 0.0
    source_indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.optimized is None:
            self.optimized = np.zeros(len(self.positions), dtype=bool)

    def __len__(self) -> int:
        return len(self.positions)

    def point(self, i: int) -> FeaturePoint:
        return FeaturePoint(
            self.positions[i], self.eigenvalues[i], self.principal_directions[i],
            self.normals[i], float(self.linearity[i]), float(self.planarity[i]),
            float(self.curvature[i]), FeatureClass(int(self.classes[i])),
            float(self.time_offsets[i]),
        )

    def class_mask(self, classes) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        for c in classes:
            mask |= self.classes == int(c)
        return mask

    def select(self, mask_or_indices) -> "FeatureCloud":
        idx = np.asarray(mask_or_indices)
        return FeatureCloud(
            self.positions[idx], self.eigenvalues[idx],
            self.principal_directions[idx], self.normals[idx],
            self.linearity[idx], self.planarity[idx], self.curvature[idx],
            self.classes[idx], self.time_offsets[idx], self.optimized[idx],
            self.frame_id, self.timestamp,
        )

    def transformed(self, pose) -> "FeatureCloud":
        """Rigidly move the cloud; eigen-descriptors are rotation-covariant."""
        return FeatureCloud(
            pose.transform(self.positions), self.eigenvalues.copy(),
            pose.rotate(self.principal_directions), pose.rotate(self.normals),
            self.linearity.copy(), self.planarity.copy(), self.curvature.copy(),
            self.classes.copy(), self.time_offsets.copy(), self.optimized.copy(),
            self.frame_id, self.timestamp,
        )

    def class_histogram(self) -> dict:
        return {FeatureClass(c).name.lower(): int(n)
                for c, n in zip(*np.unique(self.classes, return_counts=True))}


def local_pca(neighborhood):
    """Eigen-decompose the covariance of a point neighborhood.

    Returns (eigenvalues descending, eigenvectors as columns e1, e2, e3).
    """
    pts = np.asarray(neighborhood, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise TooFewNeighbors("local PCA needs at least 3 points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    return np.maximum(eigvals[order], 0.0), eigvecs[:, order]


def _batched_eigh(neighbors, counts, positions):
    """Covariance eigen-decomposition for every point, padded-neighbor form.

    neighbors: (N, k) indices with invalid entries == len(positions);
    counts: (N,) valid neighbor counts (>= 1, the point itself included).
    """
    n = len(positions)
    padded = np.vstack([positions, np.zeros(3)])
    pts = padded[neighbors]                              # (N, k, 3)
    valid = (neighbors < n)[..., None]                   # (N, k, 1)
    counts_f = counts.astype(float)[:, None]
    mean = (pts * valid).sum(axis=1) / counts_f
    centered = (pts - mean[:, None, :]) * valid
    cov = np.einsum("nki,nkj->nij", centered, centered) / counts_f[..., None]
    eigvals, eigvecs = np.linalg.eigh(cov)               # ascending
    eigvals = np.maximum(eigvals[:, ::-1], 0.0)
    eigvecs = eigvecs[:, :, ::-1]
    return eigvals, eigvecs


def classify_points(points, config: FeatureConfig | None = None,
                    time_offsets=None, frame_id: int = 0,
                    timestamp: float = 0.0) -> FeatureCloud:
    """Annotate a raw cloud with eigen-descriptors and feature classes.

    Neighborhoods are fixed-radius balls capped at `max_neighbors`. Points
    with fewer than 3 neighbors (self included) stay unclassified, as do
    degenerate all-coincident neighborhoods.
    """
    cfg = config or FeatureConfig()
    positions = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(positions)
    if n == 0:
        raise EmptyCloud("cannot classify an empty cloud")
    if cfg.neighbor_radius <= 0:
        raise ValueError("neighbor_radius must be positive")
    if time_offsets is None:
        time_offsets = np.zeros(n)
    else:
        time_offsets = np.asarray(time_offsets, dtype=float)

    tree = cKDTree(positions)
    k = min(cfg.max_neighbors, n)
    dists, neighbors = tree.query(positions, k=k,
                                  distance_upper_bound=cfg.neighbor_radius)
    if k == 1:
        dists = dists[:, None]
        neighbors = neighbors[:, None]
    counts = (neighbors < n).sum(axis=1)

    eigvals, eigvecs = _batched_eigh(neighbors, counts, positions)
    l1, l2, l3 = eigvals[:, 0], eigvals[:, 1], eigvals[:, 2]
    safe_l1 = np.where(l1 > 0, l1, 1.0)
    linearity = np.where(l1 > 0, (l1 - l2) / safe_l1, 0.0)
    planarity = np.where(l1 > 0, (l2 - l3) / safe_l1, 0.0)
    trace = l1 + l2 + l3
    curvature = np.where(trace > 0, l3 / np.where(trace > 0, trace, 1.0), 0.0)

    e1 = eigvecs[:, :, 0]
    e3 = eigvecs[:, :, 2]
    gravity = np.asarray(cfg.gravity_axis, dtype=float)
    gravity = gravity / np.linalg.norm(gravity)
    cos_cut = np.cos(np.radians(cfg.verticality_deg))
    e1_vertical = np.abs(e1 @ gravity) >= cos_cut
    e3_vertical = np.abs(e3 @ gravity) >= cos_cut

    classes = np.full(n, int(FeatureClass.UNCLASSIFIED), dtype=np.int8)
    valid = (counts >= 3) & (l1 > 0)
    linear = valid & (linearity > cfg.tau_linear)
    planar = valid & ~linear & (planarity > cfg.tau_planar)
    vertex = valid & ~linear & ~planar & (curvature > cfg.tau_curvature)
    classes[linear & e1_vertical] = int(FeatureClass.PILLAR)
    classes[linear & ~e1_vertical] = int(FeatureClass.BEAM)
    classes[planar & e3_vertical] = int(FeatureClass.ROOF)
    classes[planar & ~e3_vertical] = int(FeatureClass.FACADE)
    classes[vertex] = int(FeatureClass.VERTEX)

    return FeatureCloud(
        positions=positions.copy(), eigenvalues=eigvals,
        principal_directions=e1, normals=e3,
        linearity=linearity, planarity=planarity, curvature=curvature,
        classes=classes, time_offsets=time_offsets,
        frame_id=frame_id, timestamp=timestamp,
    )
