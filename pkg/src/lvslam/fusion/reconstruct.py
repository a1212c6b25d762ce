"""Fusion-line reconstruction from visual arcs and LiDAR features.

A detected 2D segment becomes an arc of unit directions on the camera-
centered sphere. Each arc sample is matched to its angular nearest LiDAR
feature point; depending on whether planar or linear features dominate, the
3D line is recovered either by intersecting the visual projection plane with
a plane fitted to the matched points, or by averaging the direction of a
cluster of linear points anchored at their centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import FusionConfig
from ..errors import (
    EmptyCluster,
    InsufficientSupport,
    NoDominantCluster,
    PoorPlaneFit,
)
from ..geometry import Plane, PluckerLine
from ..lidar.features import FeatureClass, LINEAR_CLASSES, PLANAR_CLASSES
from .index import DirectionIndex

PLANAR = "planar"
LINEAR = "linear"
MIXED = "mixed"
NONE = "none"


@dataclass
class VisualArc:
    """Spherical projection of one 2D segment: sampled unit directions."""

    directions: np.ndarray         # (N, 3) unit vectors, ordered along the arc
    segment_id: int = -1
    keyframe_id: int = -1

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        if len(self.directions) < 1:
            raise ValueError("an arc needs at least one sample")
        norms = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("arc samples must be unit vectors")


@dataclass
class ArcAssociation:
    """Per-sample nearest-feature matches for one arc."""

    sample_indices: np.ndarray     # (M,) indices into arc.directions
    point_indices: np.ndarray      # (M,) indices into index.cloud
    point_ids: np.ndarray          # (M,) caller-provided ids of those points
    angular_distances: np.ndarray  # (M,) radians, all <= gate
    ranges: np.ndarray             # (M,) meters
    dominant: str                  # planar | linear | mixed | none
    matched_fraction: float
    index: DirectionIndex = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.sample_indices)


def associate_arc(arc: VisualArc, index: DirectionIndex, gate: float,
                  config: FusionConfig | None = None) -> ArcAssociation:
    """Match every arc sample to its angular nearest feature within `gate`.

    The dominant class is the majority group (linear vs planar) among the
    matches: "mixed" when no group reaches the configured majority share,
    "none" when too few samples matched at all.
    """
    cfg = config or FusionConfig()
    if gate <= 0:
        raise ValueError("association gate must be positive")
    nearest, angles = index.query(arc.directions)
    hit = angles <= gate
    sample_idx = np.nonzero(hit)[0]
    point_idx = nearest[hit]
    classes = index.cloud.classes[point_idx]

    n_samples = len(arc.directions)
    matched_fraction = len(sample_idx) / n_samples
    linear_count = int(np.isin(classes, [int(c) for c in LINEAR_CLASSES]).sum())
    planar_count = int(np.isin(classes, [int(c) for c in PLANAR_CLASSES]).sum())

    if matched_fraction < cfg.min_match_fraction or len(sample_idx) == 0:
        dominant = NONE
    elif planar_count >= cfg.dominant_fraction * len(sample_idx):
        dominant = PLANAR
    elif linear_count >= cfg.dominant_fraction * len(sample_idx):
        dominant = LINEAR
    else:
        dominant = MIXED

    return ArcAssociation(
        sample_indices=sample_idx,
        point_indices=point_idx,
        point_ids=index.ids[point_idx],
        angular_distances=angles[hit],
        ranges=index.ranges[point_idx],
        dominant=dominant,
        matched_fraction=matched_fraction,
        index=index,
    )


@dataclass(frozen=True)
class FusionLine:
    """3D line recovered in the fusion frame, with provenance and support."""

    line: PluckerLine              # endpoints always present
    provenance: str                # planar-intersection | linear-cluster
    support_count: int
    mean_direction: np.ndarray     # d_fu, unit, parallel to line.direction
    confidence: float
    segment_id: int = -1
    keyframe_id: int = -1

    @property
    def endpoints(self) -> np.ndarray:
        return self.line.endpoints


def mean_direction(directions) -> np.ndarray:
    """Normalized mean of sign-aligned unit directions.

    Eigenvector signs are arbitrary, so each direction is flipped into the
    hemisphere of the running mean before averaging.
    """
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    if len(directions) == 0:
        raise EmptyCluster("no directions to average")
    total = directions[0].copy()
    for d in directions[1:]:
        total += d if np.dot(d, total) >= 0 else -d
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise EmptyCluster("directions cancel out; no consensus")
    return total / norm


def _range_consistent(assoc: ArcAssociation, keep_mask, max_rel: float):
    """Drop matches whose range strays from the per-arc median."""
    ranges = assoc.ranges[keep_mask]
    if len(ranges) == 0:
        return keep_mask
    median = np.median(ranges)
    ok = np.abs(assoc.ranges - median) <= max_rel * median
    return keep_mask & ok


def _clip_to_arc(line: PluckerLine, arc: VisualArc, camera_center) -> PluckerLine:
    """Attach endpoints where the line passes closest to the arc-end rays."""
    a = line.closest_point_to_ray(camera_center, arc.directions[0])
    b = line.closest_point_to_ray(camera_center, arc.directions[-1])
    return PluckerLine(line.moment, line.direction, endpoints=np.stack([a, b]))


def reconstruct_line_planar(arc: VisualArc, assoc: ArcAssociation,
                            camera_center=(0.0, 0.0, 0.0),
                            config: FusionConfig | None = None) -> FusionLine:
    """Plane-to-plane intersection pathway (planar-dominant arcs).

    Fits a plane to the matched planar feature points (normals filter the
    support set), intersects it with the visual projection plane through the
    camera center and the arc endpoints, and clips to the arc extent.
    """
    cfg = config or FusionConfig()
    if assoc.dominant != PLANAR:
        raise InsufficientSupport(f"dominant class is {assoc.dominant}, not planar")
    cloud = assoc.index.cloud
    planar_mask = np.isin(cloud.classes[assoc.point_indices],
                          [int(c) for c in PLANAR_CLASSES])
    planar_mask = _range_consistent(assoc, planar_mask, cfg.range_consistency)
    support = np.unique(assoc.point_indices[planar_mask])
    if len(support) < cfg.min_support:
        raise InsufficientSupport(
            f"{len(support)} planar support points < {cfg.min_support}")

    normals = cloud.normals[support]
    consensus = mean_direction(normals)
    cos_cut = np.cos(np.radians(cfg.normal_consistency_deg))
    consistent = np.abs(normals @ consensus) >= cos_cut
    if consistent.sum() < cfg.min_support:
        raise InsufficientSupport("too few normal-consistent support points")
    support = support[consistent]

    pts = cloud.positions[support]
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)      # ascending
    lidar_plane = Plane.from_point_normal(centroid, eigvecs[:, 0])
    rms = float(np.sqrt(np.mean(lidar_plane.signed_distance(pts) ** 2)))
    if rms > cfg.plane_fit_rms_max:
        raise PoorPlaneFit(f"plane fit RMS {rms:.3f} m exceeds bound")

    camera_center = np.asarray(camera_center, dtype=float)
    visual_normal = np.cross(arc.directions[0], arc.directions[-1])
    visual_plane = Plane.from_point_normal(camera_center, visual_normal)

    line = PluckerLine.from_plane_pair(lidar_plane, visual_plane)
    line = _clip_to_arc(line, arc, camera_center)

    l1 = max(eigvals[2], 1e-300)
    fit_planarity = float(np.clip((eigvals[1] - eigvals[0]) / l1, 0.0, 1.0))
    return FusionLine(
        line=line,
        provenance="planar-intersection",
        support_count=len(support),
        mean_direction=line.direction.copy(),
        confidence=float(np.clip(assoc.matched_fraction * fit_planarity, 0.0, 1.0)),
        segment_id=arc.segment_id,
        keyframe_id=arc.keyframe_id,
    )


def _cluster_by_direction(directions, max_angle: float):
    """Greedy sign-invariant direction clustering; returns index lists."""
    cos_cut = np.cos(max_angle)
    clusters: list[list[int]] = []
    means: list[np.ndarray] = []
    for i, d in enumerate(directions):
        placed = False
        for c, m in enumerate(means):
            if abs(float(np.dot(d, m))) >= cos_cut:
                clusters[c].append(i)
                aligned = d if np.dot(d, m) >= 0 else -d
                means[c] = m + (aligned - m) / len(clusters[c])
                means[c] = means[c] / np.linalg.norm(means[c])
                placed = True
                break
        if not placed:
            clusters.append([i])
            means.append(np.asarray(d, dtype=float))
    return clusters


def reconstruct_line_linear(arc: VisualArc, assoc: ArcAssociation,
                            camera_center=(0.0, 0.0, 0.0),
                            config: FusionConfig | None = None) -> FusionLine:
    """Linear-cluster pathway (linear-dominant arcs).

    Groups the matched linear points by direction similarity, keeps the
    strict-majority cluster, and anchors the averaged direction at the
    cluster centroid.
    """
    cfg = config or FusionConfig()
    if assoc.dominant != LINEAR:
        raise InsufficientSupport(f"dominant class is {assoc.dominant}, not linear")
    cloud = assoc.index.cloud
    linear_mask = np.isin(cloud.classes[assoc.point_indices],
                          [int(c) for c in LINEAR_CLASSES])
    linear_mask = _range_consistent(assoc, linear_mask, cfg.range_consistency)
    support = np.unique(assoc.point_indices[linear_mask])
    if len(support) < cfg.min_support:
        raise InsufficientSupport(
            f"{len(support)} linear support points < {cfg.min_support}")

    directions = cloud.principal_directions[support]
    clusters = _cluster_by_direction(directions, np.radians(cfg.cluster_angle_deg))
    sizes = [len(c) for c in clusters]
    largest = int(np.argmax(sizes))
    # a tie (e.g. two equal clusters) means no consensus: strict majority only
    if sizes[largest] * 2 <= len(support):
        raise NoDominantCluster(
            f"largest cluster holds {sizes[largest]}/{len(support)} points")
    members = support[clusters[largest]]

    best_direction = mean_direction(cloud.principal_directions[members])
    anchor = cloud.positions[members].mean(axis=0)
    line = PluckerLine.from_point_direction(anchor, best_direction)
    line = _clip_to_arc(line, arc, np.asarray(camera_center, dtype=float))

    d_fu = best_direction if np.dot(best_direction, line.direction) >= 0 \
        else -best_direction
    return FusionLine(
        line=line,
        provenance="linear-cluster",
        support_count=len(members),
        mean_direction=d_fu,
        confidence=float(len(members) / len(support)),
        segment_id=arc.segment_id,
        keyframe_id=arc.keyframe_id,
    )
