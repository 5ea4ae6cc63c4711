"""Procedural test geometry.

The CAD data used in real blade measurement is not shippable, so the suite
works on a twisted, tapered extruded airfoil section: low curvature, a near
symmetry broken by the twist, and an elongated extent, which is what makes
blade-like registration hard. Simple primitives (sphere band, plane patch)
and the classic 1D collinear fixture with a single outlier round it out.
"""

from __future__ import annotations

import math

import numpy as np

from .cloud import PointCloud
from .geom import RigidTransform, rodrigues
from .motion import seed_path


def _airfoil_half_thickness(x: np.ndarray, thickness: float = 0.12) -> np.ndarray:
    # NACA-style 4-digit thickness polynomial over chord fraction x in [0, 1].
    return (
        5.0
        * thickness
        * (
            0.2969 * np.sqrt(x)
            - 0.1260 * x
            - 0.3516 * x**2
            + 0.2843 * x**3
            - 0.1015 * x**4
        )
    )


def _camber_line(x: np.ndarray, m: float = 0.04, p: float = 0.4) -> np.ndarray:
    front = m / p**2 * (2.0 * p * x - x**2)
    back = m / (1.0 - p) ** 2 * ((1.0 - 2.0 * p) + 2.0 * p * x - x**2)
    return np.where(x < p, front, back)


def blade(
    n: int = 3000,
    seed: int = 0,
    span: float = 2.0,
    chord: float = 1.0,
    twist: float = math.radians(50.0),
    taper: float = 0.4,
    camber: float = 0.15,
    thickness: float = 0.25,
    platform_frac: float = 0.15,
    platform_radius: float = 0.45,
) -> PointCloud:
    """Random surface sample of a twisted, tapered extruded airfoil with a
    root platform.

    The thick, strongly cambered section and the platform matter: a thin
    symmetric sliver is nearly invariant under a half-turn about its chord,
    which leaves the orientation landscape with a second basin almost as
    deep as the true one. Real blades are cupped and carry a root, and the
    fixture keeps those asymmetries.
    """
    rng = np.random.default_rng(seed_path(seed, 20))
    n_platform = int(platform_frac * n)
    n_foil = n - n_platform
    z = rng.uniform(-0.5 * span, 0.5 * span, size=n_foil)
    x = rng.uniform(0.0, 1.0, size=n_foil)
    side = np.where(rng.random(n_foil) < 0.5, 1.0, -1.0)
    y = _camber_line(x, m=camber) + side * _airfoil_half_thickness(x, thickness)
    # Chord-centered section, twisted and tapered along the span.
    u = x - 0.5
    phi = twist * (z / span)
    scale = chord * (1.0 - taper * (z / span + 0.5))
    px = scale * (u * np.cos(phi) - y * np.sin(phi))
    py = scale * (u * np.sin(phi) + y * np.cos(phi))
    foil = np.column_stack([px, py, z])
    radius = platform_radius * np.sqrt(rng.random(n_platform))
    angle = rng.uniform(0.0, 2.0 * math.pi, n_platform)
    pz = -0.5 * span - rng.uniform(0.0, 0.08 * span, n_platform)
    platform = np.column_stack([radius * np.cos(angle), radius * np.sin(angle), pz])
    return PointCloud(np.vstack([foil, platform]))


def sphere_band(
    n: int = 1500,
    seed: int = 0,
    radius: float = 1.0,
    polar_range: tuple = (math.radians(30.0), math.radians(80.0)),
    azimuth_range: tuple = (0.0, 2.0 * math.pi),
    bump: float = 0.0,
) -> PointCloud:
    """Uniform-ish sample of a sphere section bounded in polar angle and
    azimuth (a cap band, or a partial window of one).

    A smooth band is a surface of revolution, so spins about its axis are
    unobservable to any registration; ``bump`` adds low-order radius
    harmonics (orders 2 and 5, mutually incommensurate, no symmetry
    survives) that pin the azimuth when a well-posed fixture is needed.
    """
    rng = np.random.default_rng(seed_path(seed, 21))
    c0, c1 = math.cos(polar_range[1]), math.cos(polar_range[0])
    cos_theta = rng.uniform(c0, c1, size=n)
    sin_theta = np.sqrt(1.0 - cos_theta**2)
    phi = rng.uniform(azimuth_range[0], azimuth_range[1], size=n)
    r = radius * (
        1.0
        + 0.85 * bump * np.cos(2.0 * phi + 0.7)
        + bump * np.cos(5.0 * phi + 2.1)
        + 0.5 * bump * np.cos(3.0 * np.arccos(cos_theta))
    )
    return PointCloud(
        np.column_stack(
            [r * sin_theta * np.cos(phi), r * sin_theta * np.sin(phi), r * cos_theta]
        )
    )


def plane_patch(n: int = 1000, seed: int = 0, size: float = 1.0) -> PointCloud:
    rng = np.random.default_rng(seed_path(seed, 22))
    xy = rng.uniform(-0.5 * size, 0.5 * size, size=(n, 2))
    return PointCloud(np.column_stack([xy, np.zeros(n)]))


def line_with_outlier() -> tuple[PointCloud, PointCloud]:
    """Collinear 1D fixture: template {1,2,3,4} on the x axis, reference
    shifted +5 plus one interior outlier 0.5 off its nearest real match.

    The outlier sits between real points (7.5): there the inlier basin's
    slope swallows the outlier's own alignment notch, which is the regime
    where the offset-inverse criterion is unimodal while the l2 curve keeps
    several local minima. An outlier outside the span leaves an exposed
    notch and breaks the contrast.
    """
    template = PointCloud([[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0], [4.0, 0, 0]])
    reference = PointCloud(
        [[6.0, 0, 0], [7.0, 0, 0], [8.0, 0, 0], [9.0, 0, 0], [7.5, 0, 0]]
    )
    return template, reference


def turntable_views(
    n_views: int = 8,
    step_deg: float = 10.0,
    window_deg: float = 120.0,
    points_per_view: int = 900,
    seed: int = 0,
    bump: float = 0.1,
) -> tuple[list[PointCloud], list[RigidTransform]]:
    """Synthetic turntable scan sequence over a bumpy sphere section.

    The object turns about z by ``step_deg`` between shots while a fixed
    camera sees an ``window_deg`` azimuth window, so consecutive scans share
    most of their surface. All scans live in the camera frame; the returned
    ground truth maps scan k onto scan 0's frame (a -k*step z-rotation).
    """
    z_axis = np.array([0.0, 0.0, 1.0])
    scans = []
    gt = []
    for k in range(n_views):
        # Model region rotating into the camera window at step k.
        lo = -k * math.radians(step_deg)
        visible = sphere_band(
            n=points_per_view,
            seed=seed_path(seed, 23, k),
            azimuth_range=(lo, lo + math.radians(window_deg)),
            bump=bump,
        )
        scans.append(visible.transformed(RigidTransform(rodrigues(-lo, z_axis), np.zeros(3))))
        gt.append(RigidTransform(rodrigues(lo, z_axis), np.zeros(3)))
    return scans, gt
