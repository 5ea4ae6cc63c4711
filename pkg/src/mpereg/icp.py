"""Trimmed-ICP refinement: exact nearest neighbors, residual trimming,
closed-form rigid fit, iteration to convergence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import DegenerateConfigurationError
from .geom import RigidTransform


class SpatialIndex:
    """Exact nearest-neighbor queries over a fixed reference cloud."""

    def __init__(self, reference: PointCloud):
        self.reference = reference
        self._tree = cKDTree(reference.points)

    def nearest(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the closest reference point to each query."""
        d, idx = self._tree.query(np.asarray(points, dtype=float))
        return np.atleast_1d(d), np.atleast_1d(idx)


def build_index(reference: PointCloud) -> SpatialIndex:
    return SpatialIndex(reference)


def rigid_fit(source, target, weights=None) -> RigidTransform:
    """Least-squares rigid transform taking ``source`` points onto ``target``.

    Standard weighted covariance/SVD closed form with reflection correction;
    minimizes sum w_k ||target_k - (R source_k + t)||^2.

    Raises:
        DegenerateConfigurationError: fewer than 3 pairs, or the pair
            covariance is rank-deficient (e.g. collinear points), which
            leaves the rotation underdetermined.
    """
    src = np.asarray(source, dtype=float).reshape(-1, 3)
    tgt = np.asarray(target, dtype=float).reshape(-1, 3)
    if src.shape != tgt.shape:
        raise ValueError(f"pair shape mismatch: {src.shape} vs {tgt.shape}")
    n = src.shape[0]
    if n < 3:
        raise DegenerateConfigurationError(f"rigid fit needs >= 3 pairs, got {n}")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n or np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("weights must be non-negative with positive sum")
    w = w / w.sum()
    src_bar = w @ src
    tgt_bar = w @ tgt
    h = (w[:, np.newaxis] * (src - src_bar)).T @ (tgt - tgt_bar)
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0.0 or s[1] <= 1e-9 * s[0]:
        raise DegenerateConfigurationError(
            f"rank-deficient pair covariance (singular values {s})"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, tgt_bar - r @ src_bar)


@dataclass(frozen=True)
class TrimmedIcpConfig:
    """overlap_ratio is the fraction of lowest-residual correspondences kept
    each iteration; the trim count is fixed for a whole run, which is what
    makes the trimmed MSE non-increasing."""

    overlap_ratio: float = 0.8
    max_iterations: int = 100
    mse_rel_tol: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.overlap_ratio <= 1.0):
            raise ValueError(
                f"overlap_ratio must be in (0, 1], got {self.overlap_ratio!r}"
            )
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (self.mse_rel_tol > 0.0):
            raise ValueError("mse_rel_tol must be positive")


@dataclass(frozen=True)
class TrimmedIcpResult:
    transform: RigidTransform
    mse: float
    mse_trace: tuple
    iterations: int
    degenerate: bool

    def trace_csv(self) -> str:
        lines = ["iter,trimmed_mse"]
        lines += [f"{i},{m!r}" for i, m in enumerate(self.mse_trace)]
        return "\n".join(lines) + "\n"


def trimmed_icp(
    template: PointCloud,
    reference: PointCloud,
    init: RigidTransform | None = None,
    config: TrimmedIcpConfig | None = None,
) -> TrimmedIcpResult:
    """Refine an initial alignment by trimmed iterative closest point.

    Each iteration matches every template point to its nearest reference
    point at the current pose, keeps the ceil(overlap_ratio * N) smallest
    squared residuals, and refits the full transform on the kept pairs.
    Stops when the relative trimmed-MSE change drops below ``mse_rel_tol``
    or after ``max_iterations``. A rank-deficient fit mid-run returns the
    best transform so far with ``degenerate`` set instead of raising.
    """
    config = config or TrimmedIcpConfig()
    init = init or RigidTransform.identity()
    index = build_index(reference)
    keep_n = max(1, math.ceil(config.overlap_ratio * len(template)))
    # Below this the squared residuals are floating-point noise at the data
    # scale; treat as exactly converged.
    mse_floor = (1e-14 * max(reference.bounding_diagonal(), 1.0)) ** 2
    current = init
    trace: list[float] = []
    degenerate = False
    prev_mse = None
    for _ in range(config.max_iterations):
        moved = current.apply_points(template.points)
        d, idx = index.nearest(moved)
        sq = d * d
        keep = np.argsort(sq, kind="stable")[:keep_n]
        mse = float(sq[keep].mean())
        trace.append(mse)
        if mse <= mse_floor:
            break
        if prev_mse is not None and abs(prev_mse - mse) <= config.mse_rel_tol * prev_mse:
            break
        prev_mse = mse
        try:
            current = rigid_fit(template.points[keep], reference.points[idx[keep]])
        except DegenerateConfigurationError:
            degenerate = True
            break
    return TrimmedIcpResult(
        transform=current,
        mse=trace[-1],
        mse_trace=tuple(trace),
        iterations=len(trace),
        degenerate=degenerate,
    )
