"""Gravitational field over the template: forces, torques, motion directions.

Each template point is attracted by every reference point with magnitude
G m_i m_j / (||y - x|| + eps2)^2, the exact derivative of the offset
potential, so force and energy stay consistent (a small step along the net
attraction lowers the potential). Forces decompose about the template
centroid into an axial part driving translation and a tangential part whose
torque drives rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import PointCloud
from .criterion import CriterionParams
from .geom import RigidTransform

# A direction sum this small relative to the summed term magnitudes is an
# exact cancellation (symmetry/equilibrium) seen through floating-point
# noise, not a real direction. Relative to term magnitudes, not to a
# length: force and torque units float with G, masses and eps2.
_DEGENERACY_SCALE = 1e-12


@dataclass(frozen=True)
class ForceField:
    """Per-point attractions plus their aggregate torque and axial sums."""

    per_point_force: np.ndarray  # (N, 3), one F_xi per template point
    torque_sum: np.ndarray  # sum of (x_i - center) x f_i2
    force_sum: np.ndarray  # sum of axial components f_i1
    # Summed per-term norms; the scale against which a sum counts as zero.
    _torque_scale: float = 0.0
    _force_scale: float = 0.0


@dataclass(frozen=True)
class MotionDirections:
    """Unit rotation axis and translation direction, or degenerate flags
    when the corresponding sum cancels below tolerance."""

    rotation_axis: np.ndarray | None
    translation_dir: np.ndarray | None
    degenerate_rotation: bool
    degenerate_translation: bool


def _gravitation_field(
    points: np.ndarray,
    masses: np.ndarray,
    reference: PointCloud,
    params: CriterionParams,
    distances: np.ndarray | None = None,
) -> np.ndarray:
    """(N, 3) net attraction on each of ``points`` toward the reference.

    Written as F_i = sum_j a_ij (y_j - x_i) with a_ij = magnitude/distance,
    i.e. one (N, M) x (M, 3) product instead of an (N, M, 3) temporary.
    Coincident pairs contribute zero (their direction is undefined and the
    symmetric limit cancels); the offset keeps every magnitude finite.
    """
    d = cdist(points, reference.points) if distances is None else distances
    mag = (
        params.gravitational_constant
        * masses[:, np.newaxis]
        * reference.masses[np.newaxis, :]
        / (d + params.eps2) ** 2
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        a = mag / d
    a[d == 0.0] = 0.0
    return a @ reference.points - points * a.sum(axis=1)[:, np.newaxis]


def per_point_gravitation(
    x, reference: PointCloud, params: CriterionParams, mass: float = 1.0
) -> np.ndarray:
    """Net attraction on one template point; points toward the masses.

    Equals the negative gradient of :func:`mpereg.criterion.potential_energy`
    with respect to the point's position.
    """
    pts = np.asarray(x, dtype=float).reshape(1, 3)
    return _gravitation_field(pts, np.array([mass]), reference, params)[0]


def decompose_force(f, x, center, tol: float = 1e-12):
    """Split a force into its radial (axial) and tangential parts.

    Radial direction is from ``center`` to ``x``; when the point sits on the
    center the whole force is taken as axial.
    """
    f = np.asarray(f, dtype=float)
    r = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    rn = float(np.linalg.norm(r))
    if rn < tol:
        return f.copy(), np.zeros(3)
    n = r / rn
    f1 = float(f @ n) * n
    return f1, f - f1


def torque(x, center, f2) -> np.ndarray:
    """Torque (x - center) x f2, right-hand rule."""
    return np.cross(np.asarray(x, dtype=float) - np.asarray(center, dtype=float), f2)


def compute_force_field(
    template: PointCloud,
    reference: PointCloud,
    current: RigidTransform,
    params: CriterionParams,
    center=None,
    _moved: np.ndarray | None = None,
    _distances: np.ndarray | None = None,
) -> ForceField:
    """Evaluate the field with the template at its current pose.

    ``center`` defaults to the moved template centroid, which decouples the
    rotational channel from the choice of scanner origin. ``_moved`` and
    ``_distances`` let the optimizer reuse the pose it already evaluated.
    """
    moved = current.apply_points(template.points) if _moved is None else _moved
    if center is None:
        center = moved.mean(axis=0)
    center = np.asarray(center, dtype=float)
    forces = _gravitation_field(moved, template.masses, reference, params, _distances)

    r = moved - center
    rn = np.linalg.norm(r, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = r / rn[:, np.newaxis]
    on_center = rn < 1e-12
    n[on_center] = 0.0
    f1 = (forces * n).sum(axis=1)[:, np.newaxis] * n
    f1[on_center] = forces[on_center]
    f2 = forces - f1
    torques = np.cross(r, f2)
    return ForceField(
        per_point_force=forces,
        torque_sum=torques.sum(axis=0),
        force_sum=f1.sum(axis=0),
        _torque_scale=float(np.linalg.norm(torques, axis=1).sum()),
        _force_scale=float(np.linalg.norm(f1, axis=1).sum()),
    )


def aggregate_directions(
    template: PointCloud,
    reference: PointCloud,
    current: RigidTransform,
    params: CriterionParams,
    center=None,
    _moved: np.ndarray | None = None,
    _distances: np.ndarray | None = None,
) -> MotionDirections:
    """Normalize the torque and axial-force sums into motion directions."""
    field = compute_force_field(
        template, reference, current, params, center, _moved, _distances
    )
    tn = float(np.linalg.norm(field.torque_sum))
    fn = float(np.linalg.norm(field.force_sum))
    deg_rot = tn <= _DEGENERACY_SCALE * field._torque_scale
    deg_tr = fn <= _DEGENERACY_SCALE * field._force_scale
    return MotionDirections(
        rotation_axis=None if deg_rot else field.torque_sum / tn,
        translation_dir=None if deg_tr else field.force_sum / fn,
        degenerate_rotation=deg_rot,
        degenerate_translation=deg_tr,
    )
