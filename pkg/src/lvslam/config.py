"""Pipeline configuration.

The on-disk format is a flat key-value text file, one ``section.key = value``
per line, ``#`` comments allowed. Every tunable named in the module defaults
below can be overridden from such a file.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class GeometryConfig:
    eps_segment_length: float = 1e-6   # min endpoint separation [m]
    eps_parallel: float = 1e-6         # min |n1 x n2| for plane intersection
    arc_step_deg: float = 0.2          # arc sampling interval [deg]


@dataclass
class FeatureConfig:
    neighbor_radius: float = 0.5       # local PCA radius search [m]
    max_neighbors: int = 30
    tau_linear: float = 0.6
    tau_planar: float = 0.6
    tau_curvature: float = 0.25
    verticality_deg: float = 30.0      # cutoff from the gravity axis
    gravity_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)


@dataclass
class FusionConfig:
    # the gate must bridge the sweep's angular pitch (16 rings over a 30 deg
    # fan leave 2 deg gaps); multi-frame accumulation narrows what it must
    # cover in practice
    gate_deg: float = 1.5              # association gate [deg]
    min_match_fraction: float = 0.5
    dominant_fraction: float = 0.6     # majority share for a dominant class
    min_support: int = 5
    cluster_angle_deg: float = 10.0    # direction-cluster similarity
    range_consistency: float = 0.2     # max relative deviation from median range
    plane_fit_rms_max: float = 0.05    # [m]
    normal_consistency_deg: float = 30.0  # support normals vs consensus


@dataclass
class CameraConfig:
    fx: float = 320.0
    fy: float = 320.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def matrix(self):
        import numpy as np
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass
class VisualConfig:
    min_segment_length_px: float = 30.0
    min_baseline: float = 0.05         # triangulation baseline [m]
    huber_pixels: float = 1.345
    huber_direction: float = 0.1
    direction_weight: float = 10.0     # w_dir on the direction residual
    depth_ratio_triangulated: float = 0.1
    depth_ratio_fusion: float = 0.2
    ba_window: int = 8
    ba_every: int = 4                  # run local BA every N frames; 0 disables
    ba_max_iterations: int = 30
    ba_gate_px: float = 100.0          # drop blocks grossly off at entry
    track_max_iterations: int = 20
    inlier_gate_px: float = 3.0


@dataclass
class LidarConfig:
    icp_gate: float = 1.0              # correspondence distance gate [m]
    icp_tol: float = 1e-6              # residual-change convergence tol [m]
    icp_max_iterations: int = 50
    diverge_after: int = 5             # consecutive non-improving proposals
    alpha: float = 0.6                 # max optimized-point rate in the map
    voxel_unoptimized: float = 0.2     # [m]
    voxel_optimized: float = 0.4       # [m], applied only above alpha
    map_window: int = 5                # frames kept in the local map


@dataclass
class SupervisorConfig:
    min_point_inliers: int = 20
    min_total_inliers: int = 30
    hysteresis_frames: int = 3
    max_gap: float = 0.5               # [s] between composed trajectory entries


@dataclass
class SimConfig:
    seed: int = 0
    preset: str = "room"
    n_frames: int = 40
    frame_dt: float = 0.1              # [s]
    sweep_rings: int = 16
    sweep_azimuth_step_deg: float = 1.0
    sweep_vertical_fov_deg: float = 30.0
    max_range: float = 30.0
    min_range: float = 0.3
    pixel_noise: float = 0.0
    lidar_noise: float = 0.0
    # lidar -> camera extrinsics: rotation as quaternion (x, y, z, w) mapping
    # lidar axes (x fwd, y left, z up) onto camera axes (z fwd, x right, y down),
    # then a small lever arm. 0.5*(1,-1,1,1) is that axis permutation.
    extrinsic_qx: float = 0.5
    extrinsic_qy: float = -0.5
    extrinsic_qz: float = 0.5
    extrinsic_qw: float = 0.5
    extrinsic_tx: float = 0.0
    extrinsic_ty: float = -0.08
    extrinsic_tz: float = 0.02


@dataclass
class PipelineConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    visual: VisualConfig = field(default_factory=VisualConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    supervisor: SupervisorConfig = field(default_factory=SupervisorConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def arc_step_rad(self) -> float:
        return math.radians(self.geometry.arc_step_deg)

    def items(self):
        """Yield (dotted key, value) pairs for every leaf field."""
        for section_field in dataclasses.fields(self):
            section = getattr(self, section_field.name)
            for leaf in dataclasses.fields(section):
                yield f"{section_field.name}.{leaf.name}", getattr(section, leaf.name)

    def set(self, dotted_key: str, raw_value: str) -> None:
        """Assign one dotted key from its text representation."""
        if "." not in dotted_key:
            raise ConfigError(f"expected 'section.key', got {dotted_key!r}")
        section_name, leaf_name = dotted_key.split(".", 1)
        section = getattr(self, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise ConfigError(f"unknown config section {section_name!r}")
        leaf_fields = {f.name: f for f in dataclasses.fields(section)}
        if leaf_name not in leaf_fields:
            raise ConfigError(f"unknown config key {dotted_key!r}")
        current = getattr(section, leaf_name)
        try:
            setattr(section, leaf_name, _parse_value(raw_value, type(current)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {dotted_key!r}: {raw_value!r}") from exc

    def to_text(self) -> str:
        lines = ["# lvslam config v1"]
        for key, value in self.items():
            if isinstance(value, tuple):
                value = " ".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _parse_value(raw: str, kind: type):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(raw)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    return raw


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a flat key-value config file into a PipelineConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = PipelineConfig()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        cfg.set(key.strip(), raw.strip())
    return cfg


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.to_text())
