"""Alignment criteria: inverse-distance energy and the classic l2 residual.

The registration objective is the negated sum, over all template/reference
point pairs, of the reciprocal of (Euclidean distance + eps2). The additive
offset keeps a coincident pair from contributing an infinite term, and the
full pairwise coupling is what lets inlier structure outvote outliers. The
l2 nearest-neighbor energy is kept alongside it for landscape comparison
and as the inner objective of the trimmed-ICP refinement stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .cloud import PointCloud
from .geom import RigidTransform, rodrigues

# Above this reference size the l2 energy switches from an exhaustive
# distance matrix to a kd-tree; both are exact.
_EXHAUSTIVE_NN_LIMIT = 2000


@dataclass(frozen=True)
class CriterionParams:
    """Free constants of the energy: distance offset eps2 and G."""

    eps2: float
    gravitational_constant: float = 1.0

    def __post_init__(self):
        if not (self.eps2 > 0.0):
            raise ValueError(f"eps2 must be positive, got {self.eps2!r}")
        if not (self.gravitational_constant > 0.0):
            raise ValueError(
                f"gravitational_constant must be positive, got "
                f"{self.gravitational_constant!r}"
            )


def default_eps2(reference: PointCloud, scale: float = 0.04) -> float:
    """Scale-relative distance offset: a fraction of the reference diagonal.

    The offset trades basin width against sharpness near the optimum, so a
    sensible value must follow the data units; degenerate (single-point)
    clouds fall back to 1.0.
    """
    diag = reference.bounding_diagonal()
    return scale * diag if diag > 0.0 else 1.0


def pair_distance(x, y, params: CriterionParams) -> float:
    """Offset distance ||y - x|| + eps2; strictly positive."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(y - x)) + params.eps2


def _inverse_offset_distances(
    template: PointCloud,
    reference: PointCloud,
    transform: RigidTransform,
    params: CriterionParams,
) -> np.ndarray:
    """(N, M) matrix of 1 / (||y_j - (R x_i + t)|| + eps2)."""
    moved = transform.apply_points(template.points)
    d = cdist(moved, reference.points)
    return 1.0 / (d + params.eps2)


def nfi_energy(
    template: PointCloud,
    reference: PointCloud,
    transform: RigidTransform,
    params: CriterionParams,
) -> float:
    """Negated full-inverse energy; strictly negative, lower is better.

    Per-template-point partial sums are reduced in index order so the result
    does not depend on any internal chunking.
    """
    w = _inverse_offset_distances(template, reference, transform, params)
    return float(-w.sum(axis=1).sum())


def potential_energy(
    template: PointCloud,
    reference: PointCloud,
    transform: RigidTransform,
    params: CriterionParams,
) -> float:
    """Gravitational potential energy -G sum m_i m_j / (r_ij + eps2).

    With G = 1 and unit masses this equals :func:`nfi_energy` exactly (same
    evaluation order, multiplications by 1.0 are bit-exact no-ops).
    """
    w = _inverse_offset_distances(template, reference, transform, params)
    w = w * np.outer(template.masses, reference.masses)
    return float(-(params.gravitational_constant * w.sum(axis=1).sum()))


def _nn_squared_distances(moved: np.ndarray, reference: PointCloud) -> np.ndarray:
    if len(reference) <= _EXHAUSTIVE_NN_LIMIT:
        return cdist(moved, reference.points, "sqeuclidean").min(axis=1)
    d, _ = cKDTree(reference.points).query(moved)
    return d * d


def l2_nn_energy(
    template: PointCloud,
    reference: PointCloud,
    transform: RigidTransform,
) -> float:
    """Sum of squared distances from each moved template point to its
    nearest reference point (the classic ICP objective)."""
    moved = transform.apply_points(template.points)
    return float(_nn_squared_distances(moved, reference).sum())


@dataclass(frozen=True)
class SweepAxis:
    """One landscape axis: a rigid motion scaled by a sampled parameter.

    kind 'translation' slides the template by ``value * direction``;
    kind 'rotation' turns it by ``value`` radians about ``direction``
    through the template centroid.
    """

    kind: str
    direction: np.ndarray
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.kind not in ("translation", "rotation"):
            raise ValueError(f"unknown sweep axis kind {self.kind!r}")
        d = np.array(self.direction, dtype=float).reshape(3)
        norm = float(np.linalg.norm(d))
        if norm == 0.0 or not np.all(np.isfinite(d)):
            raise ValueError("sweep axis direction must be a nonzero finite vector")
        d /= norm
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)
        if self.steps < 1:
            raise ValueError(f"sweep axis needs at least one step, got {self.steps}")
        if not (np.isfinite(self.start) and np.isfinite(self.stop)):
            raise ValueError("sweep axis range must be finite")
        if self.steps > 1 and not (self.stop > self.start):
            raise ValueError(
                f"empty sweep range [{self.start}, {self.stop}] with {self.steps} steps"
            )

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class LandscapeGrid:
    """Energies of both criteria sampled on a 1D or 2D parameter grid."""

    axis1: np.ndarray
    axis2: np.ndarray | None
    nfi: np.ndarray
    l2: np.ndarray

    def to_csv(self) -> str:
        lines = ["axis1,axis2,nfi,l2"]
        if self.axis2 is None:
            for a, e_n, e_l in zip(self.axis1, self.nfi, self.l2):
                lines.append(f"{float(a)!r},,{float(e_n)!r},{float(e_l)!r}")
        else:
            for i, a in enumerate(self.axis1):
                for j, b in enumerate(self.axis2):
                    lines.append(
                        f"{float(a)!r},{float(b)!r},"
                        f"{float(self.nfi[i, j])!r},{float(self.l2[i, j])!r}"
                    )
        return "\n".join(lines) + "\n"


def _axis_transform(axis: SweepAxis, value: float, center: np.ndarray) -> RigidTransform:
    if axis.kind == "translation":
        return RigidTransform(np.eye(3), value * axis.direction)
    r = rodrigues(value, axis.direction)
    return RigidTransform(r, center - r @ center)


def landscape_sweep(
    template: PointCloud,
    reference: PointCloud,
    params: CriterionParams,
    axes: tuple[SweepAxis, ...],
) -> LandscapeGrid:
    """Evaluate both criteria on every node of a 1- or 2-axis grid.

    For two axes the motions compose with axis1 applied last, i.e. the node
    transform is ``axis1(value1) o axis2(value2)``; rotations pivot about
    the untransformed template centroid.
    """
    if len(axes) not in (1, 2):
        raise ValueError(f"landscape_sweep takes 1 or 2 axes, got {len(axes)}")
    center = template.centroid()
    v1 = axes[0].values()
    if len(axes) == 1:
        nfi = np.empty(len(v1))
        l2 = np.empty(len(v1))
        for i, a in enumerate(v1):
            t = _axis_transform(axes[0], float(a), center)
            nfi[i] = nfi_energy(template, reference, t, params)
            l2[i] = l2_nn_energy(template, reference, t)
        return LandscapeGrid(v1, None, nfi, l2)
    v2 = axes[1].values()
    nfi = np.empty((len(v1), len(v2)))
    l2 = np.empty((len(v1), len(v2)))
    for i, a in enumerate(v1):
        ta = _axis_transform(axes[0], float(a), center)
        for j, b in enumerate(v2):
            t = ta.compose(_axis_transform(axes[1], float(b), center))
            nfi[i, j] = nfi_energy(template, reference, t, params)
            l2[i, j] = l2_nn_energy(template, reference, t)
    return LandscapeGrid(v1, v2, nfi, l2)


def local_minima_1d(values) -> list[int]:
    """Indices of strict interior local minima of a sampled 1D curve."""
    v = np.asarray(values, dtype=float)
    out = []
    for i in range(1, len(v) - 1):
        if v[i] < v[i - 1] and v[i] < v[i + 1]:
            out.append(i)
    return out
