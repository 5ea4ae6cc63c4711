"""Rigid-body geometry: rotation matrices, axis-angle, SE(3) transforms.

Rotations are kept as full 3x3 matrices; the optimizer's update rule is
stated directly in Rodrigues matrix form, so no quaternion round trips
are needed. All values are immutable; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_UNIT_AXIS_TOL = 1e-6
_ROTATION_TOL = 1e-6


def skew(v) -> np.ndarray:
    """Skew-symmetric cross-product matrix: ``skew(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(angle: float, axis) -> np.ndarray:
    """Rotation matrix for a turn of ``angle`` radians about a unit ``axis``.

    Computed as ``cos(a) I + (1 - cos(a)) n n^T + sin(a) [n]x``, which is a
    proper rotation for any finite angle.

    Raises:
        ValueError: if the axis is not unit length (beyond 1e-6) or the
            angle is not finite.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError(f"rotation axis must be a 3-vector, got shape {axis.shape}")
    if not math.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle!r}")
    norm = float(np.linalg.norm(axis))
    if abs(norm - 1.0) > _UNIT_AXIS_TOL:
        raise ValueError(f"rotation axis must be unit length, got norm {norm!r}")
    c = math.cos(angle)
    s = math.sin(angle)
    return c * np.eye(3) + (1.0 - c) * np.outer(axis, axis) + s * skew(axis)


def nearest_rotation(m) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) (closest in Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u = u.copy()
        u[:, -1] *= -1.0
        r = u @ vt
    return r


def _check_rotation(r: np.ndarray, tol: float = _ROTATION_TOL) -> None:
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rotation contains non-finite entries")
    err = np.abs(r.T @ r - np.eye(3)).max()
    det = np.linalg.det(r)
    if err > tol or abs(det - 1.0) > tol:
        raise ValueError(
            f"not a proper rotation: |R^T R - I|_max = {err:.3e}, det = {det:.9f}"
        )


@dataclass(frozen=True)
class RigidTransform:
    """An element (R, t) of SE(3) acting on points as ``R p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        _check_rotation(r)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation contains non-finite entries")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply_points(self, points) -> np.ndarray:
        """Map an (N, 3) array of points through the transform."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def renormalized(self) -> "RigidTransform":
        """Re-project the rotation onto SO(3) to shed accumulated drift."""
        return RigidTransform(nearest_rotation(self.rotation), self.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def inverse(t: RigidTransform) -> RigidTransform:
    return t.inverse()


@dataclass(frozen=True)
class AxisAngle:
    """Canonical axis-angle rotation: unit axis, angle in [0, pi].

    Any finite input angle is wrapped into (-pi, pi] and a negative angle
    is folded into the opposite axis, so equal rotations compare equal.
    """

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(3)
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > _UNIT_AXIS_TOL:
            raise ValueError(f"axis must be unit length, got norm {norm!r}")
        axis /= norm
        angle = float(self.angle)
        if not math.isfinite(angle):
            raise ValueError(f"angle must be finite, got {angle!r}")
        angle = math.remainder(angle, 2.0 * math.pi)  # wraps into [-pi, pi]
        if angle < 0.0:
            angle = -angle
            axis = -axis
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", angle)

    def to_rotation(self) -> np.ndarray:
        return rodrigues(self.angle, self.axis)

    @staticmethod
    def from_rotation(r) -> "AxisAngle":
        r = np.asarray(r, dtype=float)
        _check_rotation(r)
        cos_a = min(1.0, max(-1.0, (np.trace(r) - 1.0) / 2.0))
        angle = math.acos(cos_a)
        if angle < 1e-12:
            return AxisAngle(np.array([0.0, 0.0, 1.0]), 0.0)
        if math.pi - angle < 1e-6:
            # Near pi the skew part vanishes; recover the axis from R + I.
            m = (r + np.eye(3)) / 2.0
            axis = np.sqrt(np.maximum(np.diag(m), 0.0))
            k = int(np.argmax(axis))
            axis[(k + 1) % 3] = m[k, (k + 1) % 3] / axis[k]
            axis[(k + 2) % 3] = m[k, (k + 2) % 3] / axis[k]
            axis /= np.linalg.norm(axis)
            return AxisAngle(axis, angle)
        axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
        axis /= 2.0 * math.sin(angle)
        axis /= np.linalg.norm(axis)
        return AxisAngle(axis, angle)
