"""Point clouds: ordered 3D points with optional per-point masses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import RigidTransform


@dataclass(frozen=True)
class PointCloud:
    """Immutable ordered set of 3D points with positive per-point masses.

    ``masses`` defaults to all ones; it only matters for the gravitational
    energy weighting and is carried unchanged through every transform,
    downsample and merge.
    """

    points: np.ndarray
    masses: np.ndarray = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be an (N, 3) array, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise ValueError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.masses is None:
            masses = np.ones(pts.shape[0])
        else:
            masses = np.array(self.masses, dtype=float).reshape(-1)
        if masses.shape[0] != pts.shape[0]:
            raise ValueError(
                f"masses length {masses.shape[0]} != point count {pts.shape[0]}"
            )
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0.0):
            raise ValueError("all masses must be positive and finite")
        pts.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return self.points.shape[0]

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def bounding_diagonal(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def transformed(self, t: RigidTransform) -> "PointCloud":
        return PointCloud(t.apply_points(self.points), self.masses)


def apply_transform(t: RigidTransform, cloud: PointCloud) -> PointCloud:
    """Map every point through ``R p + t``; order and masses are preserved."""
    return cloud.transformed(t)
