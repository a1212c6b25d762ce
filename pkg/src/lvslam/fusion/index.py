"""Angular nearest-neighbor index over feature-point viewing directions.

Feature points (already expressed in the camera frame at the camera
timestamp) are keyed by their unit direction from the camera center; the
Euclidean metric on unit vectors is monotone in angle, so a standard KD-tree
answers angular queries. Ties resolve to the lowest point index.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyCloud
from ..lidar.features import FeatureCloud

_TIE_TOL = 1e-12


class DirectionIndex:
    """Spatial index over unit-sphere directions of a FeatureCloud."""

    def __init__(self, cloud: FeatureCloud, ids=None):
        if len(cloud) == 0:
            raise EmptyCloud("cannot index an empty feature cloud")
        self.cloud = cloud
        self.ranges = np.linalg.norm(cloud.positions, axis=1)
        if np.any(self.ranges < 1e-12):
            raise ValueError("feature point at the camera center")
        self.directions = cloud.positions / self.ranges[:, None]
        self.ids = np.arange(len(cloud)) if ids is None else np.asarray(ids)
        self._tree = cKDTree(self.directions)

    def __len__(self) -> int:
        return len(self.cloud)

    def query(self, directions):
        """Nearest stored point per query direction.

        Returns (indices, angular distances in radians). Queries must be unit
        vectors. Exact chord-distance ties go to the lowest point index.
        """
        directions = np.asarray(directions, dtype=float)
        single = directions.ndim == 1
        if single:
            directions = directions[None, :]
        k = min(4, len(self.cloud))
        dists, idx = self._tree.query(directions, k=k)
        if k == 1:
            dists = dists[:, None]
            idx = idx[:, None]
        best = np.empty(len(directions), dtype=int)
        for row in range(len(directions)):
            tied = idx[row][dists[row] <= dists[row, 0] + _TIE_TOL]
            best[row] = tied.min()
        chord = np.linalg.norm(self.directions[best] - directions, axis=1)
        angles = 2.0 * np.arcsin(np.clip(chord * 0.5, 0.0, 1.0))
        if single:
            return int(best[0]), float(angles[0])
        return best, angles
