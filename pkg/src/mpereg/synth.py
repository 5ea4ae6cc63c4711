"""Synthetic experiment harness: seeded perturbations, error metrics, and
the noise / outlier / sampling-ratio robustness sweeps."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .cloud import PointCloud
from .geom import RigidTransform, rodrigues
from .icp import TrimmedIcpConfig, trimmed_icp
from .motion import MpeConfig, mpe_align, seed_path


@dataclass(frozen=True)
class PerturbationSpec:
    """Recipe for corrupting a ground-truth pose problem.

    Draw order within a seed is fixed (axis, angle, translation) so results
    are reproducible independent of downstream sampling.
    """

    gaussian_sigma: float = 0.0
    outlier_count: int = 0
    rotation_angle_range: tuple = (0.0, math.pi / 2)
    translation_range: tuple = (0.0, 0.0)
    seed: int | tuple = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be non-negative")
        if self.outlier_count < 0:
            raise ValueError("outlier_count must be non-negative")
        lo, hi = self.rotation_angle_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"bad rotation angle range {self.rotation_angle_range!r}")
        lo, hi = self.translation_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"bad translation range {self.translation_range!r}")


def random_pose(spec: PerturbationSpec) -> RigidTransform:
    """Uniform random axis, angle in the given range, per-axis uniform
    translation; deterministic per seed."""
    rng = np.random.default_rng(seed_path(spec.seed, 10))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(*spec.rotation_angle_range)
    translation = rng.uniform(*spec.translation_range, size=3)
    return RigidTransform(rodrigues(float(angle), axis), translation)


def add_gaussian_noise(cloud: PointCloud, sigma: float, seed) -> PointCloud:
    """Independent zero-mean Gaussian displacement per coordinate."""
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0:
        return cloud
    rng = np.random.default_rng(seed_path(seed, 11))
    return PointCloud(
        cloud.points + rng.normal(scale=sigma, size=cloud.points.shape), cloud.masses
    )


def add_uniform_outliers(cloud: PointCloud, count: int, seed) -> PointCloud:
    """Append points drawn uniformly from the bounding cube of the cloud.

    Cube side is the largest bounding-box extent, centered on the box
    center; original points keep their order and come first.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return cloud
    lo, hi = cloud.bounding_box()
    center = 0.5 * (lo + hi)
    half = 0.5 * float((hi - lo).max())
    rng = np.random.default_rng(seed_path(seed, 12))
    extra = rng.uniform(center - half, center + half, size=(count, 3))
    return PointCloud(
        np.vstack([cloud.points, extra]),
        np.concatenate([cloud.masses, np.ones(count)]),
    )


def rotation_error(r_gt, r_est) -> float:
    """Geodesic angle between two rotations, in degrees."""
    r_gt = np.asarray(r_gt, dtype=float)
    r_est = np.asarray(r_est, dtype=float)
    cos_a = (np.trace(r_gt @ r_est.T) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, cos_a))))


def translation_error(t_gt, t_est) -> float:
    return float(np.linalg.norm(np.asarray(t_gt, dtype=float) - np.asarray(t_est, dtype=float)))


def rmse(aligned: PointCloud, ground_truth_aligned: PointCloud) -> float:
    """Root-mean-square index-paired distance between two placements of the
    same source cloud (isolates transform error from correspondence error)."""
    if len(aligned) != len(ground_truth_aligned):
        raise ValueError(
            f"rmse needs index-paired clouds, got {len(aligned)} vs "
            f"{len(ground_truth_aligned)} points"
        )
    d2 = ((aligned.points - ground_truth_aligned.points) ** 2).sum(axis=1)
    return float(np.sqrt(d2.mean()))


@dataclass(frozen=True)
class ErrorMetrics:
    rotation_error_deg: float
    translation_error: float
    rmse: float


def pipeline_register(
    template: PointCloud,
    reference: PointCloud,
    mpe: MpeConfig | None = None,
    icp: TrimmedIcpConfig | None = None,
) -> RigidTransform:
    """Coarse alignment followed by trimmed-ICP refinement."""
    coarse, _ = mpe_align(template, reference, mpe or MpeConfig())
    return trimmed_icp(template, reference, coarse, icp or TrimmedIcpConfig()).transform


def evaluate_estimate(
    model: PointCloud, gt: RigidTransform, est: RigidTransform
) -> ErrorMetrics:
    return ErrorMetrics(
        rotation_error_deg=rotation_error(gt.rotation, est.rotation),
        translation_error=translation_error(gt.translation, est.translation),
        rmse=rmse(model.transformed(est), model.transformed(gt)),
    )


@dataclass(frozen=True)
class SweepTrial:
    level: float
    trial: int
    metrics: ErrorMetrics
    runtime_s: float


@dataclass(frozen=True)
class SweepLevelSummary:
    level: float
    mean: ErrorMetrics
    std: ErrorMetrics


@dataclass(frozen=True)
class SweepResult:
    sweep_axis: str
    trials: tuple
    levels: tuple

    def to_csv(self, include_runtime: bool = True) -> str:
        """Per-trial rows; runtime is wall clock and can be left out when a
        byte-reproducible file is wanted."""
        header = "sweep_axis,level,trial,rot_err_deg,trans_err,rmse"
        if include_runtime:
            header += ",runtime_s"
        lines = [header]
        for t in self.trials:
            row = (
                f"{self.sweep_axis},{t.level!r},{t.trial},"
                f"{t.metrics.rotation_error_deg!r},{t.metrics.translation_error!r},"
                f"{t.metrics.rmse!r}"
            )
            if include_runtime:
                row += f",{t.runtime_s!r}"
            lines.append(row)
        return "\n".join(lines) + "\n"

    def aggregate_csv(self) -> str:
        lines = [
            "sweep_axis,level,mean_rot_err_deg,std_rot_err_deg,"
            "mean_trans_err,std_trans_err,mean_rmse,std_rmse"
        ]
        for s in self.levels:
            lines.append(
                f"{self.sweep_axis},{s.level!r},"
                f"{s.mean.rotation_error_deg!r},{s.std.rotation_error_deg!r},"
                f"{s.mean.translation_error!r},{s.std.translation_error!r},"
                f"{s.mean.rmse!r},{s.std.rmse!r}"
            )
        return "\n".join(lines) + "\n"

    def mean_rmse(self) -> list[float]:
        return [s.mean.rmse for s in self.levels]


SWEEP_AXES = ("noise", "outliers", "sample-ratio")


def run_sweep(
    model: PointCloud,
    sweep_axis: str,
    levels,
    trials_per_level: int = 10,
    mpe: MpeConfig | None = None,
    icp: TrimmedIcpConfig | None = None,
    seed: int = 0,
    rotation_angle_range: tuple = (0.0, math.pi / 2),
    translation_range: tuple | None = None,
    perturb_side: str = "reference",
) -> SweepResult:
    """Robustness study over one perturbation axis.

    For every level and trial: draw a random ground-truth pose of the model,
    build the reference as the posed copy, corrupt it per the sweep axis
    (or corrupt the template when ``perturb_side='template'``), register
    with the full pipeline, and score against the known pose. Levels mean:
    noise -> Gaussian sigma, outliers -> appended point count,
    sample-ratio -> coarse-stage downsample fraction of the model size.
    """
    if sweep_axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {sweep_axis!r}, want one of {SWEEP_AXES}")
    if perturb_side not in ("reference", "template"):
        raise ValueError(f"perturb_side must be 'reference' or 'template'")
    if trials_per_level < 1:
        raise ValueError("trials_per_level must be at least 1")
    mpe = mpe or MpeConfig()
    icp = icp or TrimmedIcpConfig()
    if translation_range is None:
        half = 0.25 * model.bounding_diagonal()
        translation_range = (-half, half)

    trials = []
    summaries = []
    for li, level in enumerate(levels):
        level = float(level)
        per_level = []
        for trial in range(trials_per_level):
            trial_seed = seed_path(seed, li, trial)
            spec = PerturbationSpec(
                rotation_angle_range=rotation_angle_range,
                translation_range=translation_range,
                seed=trial_seed,
            )
            gt = random_pose(spec)
            template = model
            reference = model.transformed(gt)
            if sweep_axis == "noise":
                noisy = add_gaussian_noise
                if perturb_side == "reference":
                    reference = noisy(reference, level, trial_seed)
                else:
                    template = noisy(template, level, trial_seed)
            elif sweep_axis == "outliers":
                count = int(round(level))
                if perturb_side == "reference":
                    reference = add_uniform_outliers(reference, count, trial_seed)
                else:
                    template = add_uniform_outliers(template, count, trial_seed)
            trial_mpe = replace(mpe, seed=trial_seed)
            if sweep_axis == "sample-ratio":
                trial_mpe = replace(
                    trial_mpe, downsample_count=max(3, round(level * len(model)))
                )
            t0 = time.perf_counter()
            est = pipeline_register(template, reference, trial_mpe, icp)
            runtime = time.perf_counter() - t0
            metrics = evaluate_estimate(model, gt, est)
            rec = SweepTrial(level, trial, metrics, runtime)
            trials.append(rec)
            per_level.append(rec)
        summaries.append(_summarize_level(level, per_level))
    return SweepResult(sweep_axis=sweep_axis, trials=tuple(trials), levels=tuple(summaries))


def _summarize_level(level: float, recs) -> SweepLevelSummary:
    rot = np.array([r.metrics.rotation_error_deg for r in recs])
    tr = np.array([r.metrics.translation_error for r in recs])
    rm = np.array([r.metrics.rmse for r in recs])

    def stats(v):
        m = float(v.mean())
        s = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        return m, s

    (rot_m, rot_s), (tr_m, tr_s), (rm_m, rm_s) = stats(rot), stats(tr), stats(rm)
    return SweepLevelSummary(
        level=level,
        mean=ErrorMetrics(rot_m, tr_m, rm_m),
        std=ErrorMetrics(rot_s, tr_s, rm_s),
    )
