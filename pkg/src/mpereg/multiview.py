"""Sequential multiview merge: register each scan to the growing model,
accept and merge when the overlap clears the threshold, discard otherwise."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .criterion import nfi_energy
from .geom import RigidTransform
from .icp import TrimmedIcpConfig, TrimmedIcpResult, build_index, trimmed_icp
from .motion import MotionTrace, MpeConfig, mpe_align, seed_path
from .synth import rotation_error, translation_error


def _sequential_mpe_defaults() -> MpeConfig:
    # Scans arriving in sequence are close to aligned already (adjacent
    # views overlap heavily); full-size initial strides would kick a
    # near-aligned pair far from its basin before annealing back.
    return MpeConfig(initial_theta=math.radians(20.0))


@dataclass
class MultiviewConfig:
    """Pipeline thresholds plus the nested coarse/fine stage configs.

    ``None`` distances resolve against the current reference: overlap_dist
    to twice its median nearest-neighbor spacing, merge_dedup_dist to half
    of overlap_dist. ``overlap_count`` switches acceptance to an absolute
    overlapping-point count instead of the fraction ``tau0``. The nested
    coarse config defaults to gentler strides than a cold-start pairwise
    run, relative poses between consecutive views being small.
    """

    tau0: float = 0.3
    overlap_dist: float | None = None
    merge_dedup_dist: float | None = None
    overlap_count: int | None = None
    mpe: MpeConfig = field(default_factory=_sequential_mpe_defaults)
    icp: TrimmedIcpConfig = field(default_factory=TrimmedIcpConfig)

    def __post_init__(self):
        if not (0.0 < self.tau0 <= 1.0):
            raise ValueError(f"tau0 must be in (0, 1], got {self.tau0!r}")
        if self.overlap_dist is not None and not (self.overlap_dist > 0.0):
            raise ValueError("overlap_dist must be positive")
        if self.merge_dedup_dist is not None and self.merge_dedup_dist < 0.0:
            raise ValueError("merge_dedup_dist must be non-negative")
        if self.overlap_count is not None and self.overlap_count < 1:
            raise ValueError("overlap_count must be at least 1")


def median_nn_spacing(cloud: PointCloud) -> float:
    """Median distance from each point to its nearest other point."""
    if len(cloud) < 2:
        return 0.0
    d, _ = cKDTree(cloud.points).query(cloud.points, k=2)
    return float(np.median(d[:, 1]))


def _resolved_overlap_dist(config: MultiviewConfig, reference: PointCloud) -> float:
    if config.overlap_dist is not None:
        return config.overlap_dist
    spacing = median_nn_spacing(reference)
    if spacing > 0.0:
        return 2.0 * spacing
    diag = reference.bounding_diagonal()
    return 0.05 * diag if diag > 0.0 else 1.0


def overlap_fraction(
    aligned_template: PointCloud, reference: PointCloud, overlap_dist: float
) -> float:
    """Fraction of aligned template points with a reference neighbor within
    ``overlap_dist``."""
    d, _ = build_index(reference).nearest(aligned_template.points)
    return float((d <= overlap_dist).mean())


def merge(
    reference: PointCloud, aligned_template: PointCloud, merge_dedup_dist: float
) -> PointCloud:
    """Union of both clouds with near-duplicates collapsed.

    An aligned template point strictly within ``merge_dedup_dist`` of its
    nearest reference point replaces that reference point by the midpoint of
    the pair (mass averaged) instead of being appended, so a zero radius
    gives the plain concatenation.
    """
    d, idx = build_index(reference).nearest(aligned_template.points)
    dup = d < merge_dedup_dist
    pts = reference.points.copy()
    masses = reference.masses.copy()
    for i in np.flatnonzero(dup):
        j = idx[i]
        pts[j] = 0.5 * (pts[j] + aligned_template.points[i])
        masses[j] = 0.5 * (masses[j] + aligned_template.masses[i])
    keep = ~dup
    if keep.any():
        pts = np.vstack([pts, aligned_template.points[keep]])
        masses = np.concatenate([masses, aligned_template.masses[keep]])
    return PointCloud(pts, masses)


@dataclass(frozen=True)
class PairRegistration:
    transform: RigidTransform
    overlap: float
    coarse_transform: RigidTransform
    mpe_trace: MotionTrace
    icp_result: TrimmedIcpResult
    nfi_coarse: float
    nfi_refined: float


def register_pair(
    template: PointCloud, reference: PointCloud, config: MultiviewConfig | None = None
) -> PairRegistration:
    """Full pairwise pipeline: coarse alignment, trimmed-ICP refinement,
    overlap measured at the refined pose."""
    config = config or MultiviewConfig()
    coarse, trace = mpe_align(template, reference, config.mpe)
    refined = trimmed_icp(template, reference, coarse, config.icp)
    params = config.mpe.resolved(reference, template).criterion_params()
    overlap = overlap_fraction(
        template.transformed(refined.transform),
        reference,
        _resolved_overlap_dist(config, reference),
    )
    return PairRegistration(
        transform=refined.transform,
        overlap=overlap,
        coarse_transform=coarse,
        mpe_trace=trace,
        icp_result=refined,
        nfi_coarse=nfi_energy(template, reference, coarse, params),
        nfi_refined=nfi_energy(template, reference, refined.transform, params),
    )


@dataclass(frozen=True)
class ScanRecord:
    scan_id: int
    status: str  # 'accepted' | 'discarded'
    transform: RigidTransform
    overlap: float
    nfi: float
    seconds: float


@dataclass(frozen=True)
class MultiviewReport:
    per_scan: tuple
    model: PointCloud

    def report_text(self, ground_truth=None) -> str:
        """One line per scan; errors vs. ground truth appended when given.

        ``ground_truth`` maps scan id to the true scan-to-reference
        transform (list or dict); the first scan defines the reference
        frame and has no row of its own.
        """
        lines = ["scan_id status overlap nfi_energy seconds rot_err_deg trans_err"]
        for rec in self.per_scan:
            gt = None
            if ground_truth is not None:
                try:
                    gt = ground_truth[rec.scan_id]
                except (IndexError, KeyError):
                    gt = None
            if gt is None:
                err = "- -"
            else:
                err = (
                    f"{rotation_error(gt.rotation, rec.transform.rotation)!r} "
                    f"{translation_error(gt.translation, rec.transform.translation)!r}"
                )
            lines.append(
                f"{rec.scan_id} {rec.status} {rec.overlap!r} {rec.nfi!r} "
                f"{rec.seconds:.3f} {err}"
            )
        return "\n".join(lines) + "\n"


def multiview_register(
    scans, config: MultiviewConfig | None = None
) -> MultiviewReport:
    """Register a scan sequence into one model.

    The first scan seeds the reference; each later scan is registered
    against the current merged model, then merged in when its overlap
    clears the acceptance threshold and discarded otherwise (reported, not
    raised). Per-scan seeds derive from the base seed and the scan id.
    """
    scans = list(scans)
    if len(scans) < 2:
        raise ValueError(f"multiview needs at least 2 scans, got {len(scans)}")
    config = config or MultiviewConfig()
    reference = scans[0]
    records = []
    for scan_id, scan in enumerate(scans[1:], start=1):
        t0 = time.perf_counter()
        pair_cfg = replace(
            config, mpe=replace(config.mpe, seed=seed_path(config.mpe.seed, scan_id))
        )
        pair = register_pair(scan, reference, pair_cfg)
        if config.overlap_count is not None:
            accepted = pair.overlap * len(scan) >= config.overlap_count
        else:
            accepted = pair.overlap >= config.tau0
        if accepted:
            dedup = config.merge_dedup_dist
            if dedup is None:
                dedup = 0.5 * _resolved_overlap_dist(config, reference)
            reference = merge(reference, scan.transformed(pair.transform), dedup)
        records.append(
            ScanRecord(
                scan_id=scan_id,
                status="accepted" if accepted else "discarded",
                transform=pair.transform,
                overlap=pair.overlap,
                nfi=pair.nfi_refined,
                seconds=time.perf_counter() - t0,
            )
        )
    return MultiviewReport(per_scan=tuple(records), model=reference)
