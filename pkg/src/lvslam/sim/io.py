"""File formats: trajectories, world specs, sweep dumps, health logs.

Every format carries a `# lvslam <kind> v1` header line. Trajectories use
the space-separated "timestamp tx ty tz qx qy qz qw" convention with 12
significant digits.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import SourceError
from ..geometry import Pose
from ..sweep import SensorSweep
from .world import World

_FLOAT = "{:.12g}"


def write_trajectory(path, poses) -> None:
    lines = ["# lvslam trajectory v1"]
    for pose in poses:
        q = pose.rotation
        t = pose.translation
        fields = [pose.timestamp, t[0], t[1], t[2], q[0], q[1], q[2], q[3]]
        lines.append(" ".join(_FLOAT.format(v) for v in fields))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> list:
    path = Path(path)
    if not path.exists():
        raise SourceError(f"trajectory file not found: {path}")
    poses = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        vals = [float(tok) for tok in line.split()]
        if len(vals) != 8:
            raise SourceError(f"bad trajectory row: {line!r}")
        poses.append(Pose(np.array(vals[4:8]), np.array(vals[1:4]),
                          timestamp=vals[0]))
    return poses


def write_world(path, world: World) -> None:
    lines = ["# lvslam world v1", f"name {world.name}", f"seed {world.seed}",
             "gravity " + " ".join(_FLOAT.format(v) for v in world.gravity)]
    lines.append("[segments]")
    for a, b in world.segments:
        lines.append(" ".join(_FLOAT.format(v) for v in np.concatenate([a, b])))
    lines.append("[planes]")
    for quad in world.planes:
        lines.append(" ".join(_FLOAT.format(v) for v in quad.ravel()))
    lines.append("[points]")
    for p in world.points:
        lines.append(" ".join(_FLOAT.format(v) for v in p))
    Path(path).write_text("\n".join(lines) + "\n")


def read_world(path) -> World:
    path = Path(path)
    if not path.exists():
        raise SourceError(f"world file not found: {path}")
    name, seed = "custom", 0
    gravity = np.array([0.0, 0.0, 1.0])
    sections = {"segments": [], "planes": [], "points": []}
    current = None
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in sections:
                raise SourceError(f"unknown world section {current!r}")
            continue
        if current is None:
            key, _, rest = line.partition(" ")
            if key == "name":
                name = rest.strip()
            elif key == "seed":
                seed = int(rest)
            elif key == "gravity":
                gravity = np.array([float(v) for v in rest.split()])
            else:
                raise SourceError(f"unknown world header {key!r}")
            continue
        sections[current].append([float(v) for v in line.split()])
    segments = np.array(sections["segments"], dtype=float).reshape(-1, 2, 3) \
        if sections["segments"] else np.zeros((0, 2, 3))
    planes = np.array(sections["planes"], dtype=float).reshape(-1, 4, 3) \
        if sections["planes"] else np.zeros((0, 4, 3))
    points = np.array(sections["points"], dtype=float).reshape(-1, 3) \
        if sections["points"] else np.zeros((0, 3))
    return World(segments, planes, points, gravity, seed=seed, name=name)


def write_sweep_csv(path, sweep: SensorSweep) -> None:
    lines = ["# lvslam sweep v1", "x,y,z,time_offset_sec"]
    for p, t in zip(sweep.points, sweep.time_offsets):
        lines.append(",".join(_FLOAT.format(v) for v in (p[0], p[1], p[2], t)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sweep_csv(path, end_timestamp: float = 0.0,
                   duration: float = 0.1) -> SensorSweep:
    path = Path(path)
    if not path.exists():
        raise SourceError(f"sweep file not found: {path}")
    rows = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("x,"):
            continue
        rows.append([float(v) for v in line.split(",")])
    data = np.array(rows, dtype=float).reshape(-1, 4)
    return SensorSweep(points=data[:, :3], time_offsets=data[:, 3],
                       end_timestamp=end_timestamp, duration=duration)


def write_sweep_binary(path, sweep: SensorSweep) -> None:
    """Little-endian float64 records (x, y, z, time_offset_sec)."""
    with open(path, "wb") as fh:
        fh.write(b"LVSWEEP1")
        fh.write(struct.pack("<q", len(sweep)))
        data = np.column_stack([sweep.points, sweep.time_offsets])
        fh.write(data.astype("<f8").tobytes())


def read_sweep_binary(path, end_timestamp: float = 0.0,
                      duration: float = 0.1) -> SensorSweep:
    path = Path(path)
    if not path.exists():
        raise SourceError(f"sweep file not found: {path}")
    raw = path.read_bytes()
    if raw[:8] != b"LVSWEEP1":
        raise SourceError(f"bad sweep magic in {path}")
    (count,) = struct.unpack("<q", raw[8:16])
    data = np.frombuffer(raw[16:], dtype="<f8").reshape(count, 4)
    return SensorSweep(points=data[:, :3].copy(),
                       time_offsets=data[:, 3].copy(),
                       end_timestamp=end_timestamp, duration=duration)


def write_health_csv(path, records) -> None:
    """records: iterable of (frame id, status, point inliers, line inliers,
    source)."""
    lines = ["# lvslam health v1",
             "frame_id,status,point_inliers,line_inliers,source"]
    for rec in records:
        lines.append(",".join(str(v) for v in rec))
    Path(path).write_text("\n".join(lines) + "\n")
