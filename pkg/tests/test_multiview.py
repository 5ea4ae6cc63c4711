"""Multiview pipeline tests: overlap counting, merging, scan sequencing."""

import math

import numpy as np
import pytest

from mpereg import (
    MpeConfig,
    MultiviewConfig,
    RigidTransform,
    TrimmedIcpConfig,
    merge,
    multiview_register,
    overlap_fraction,
    register_pair,
    rodrigues,
    rotation_error,
    translation_error,
)
from mpereg.cloud import PointCloud
from mpereg.fixtures import sphere_band, turntable_views
from mpereg.multiview import median_nn_spacing


def small_config(seed=0):
    return MultiviewConfig(
        mpe=MpeConfig(seed=seed, downsample_count=300),
        icp=TrimmedIcpConfig(overlap_ratio=0.8),
    )


class TestOverlapFraction:
    def test_identical_clouds(self):
        rng = np.random.default_rng(80)
        c = PointCloud(rng.normal(size=(100, 3)))
        assert overlap_fraction(c, c, overlap_dist=1e-6) == 1.0

    def test_disjoint_clouds(self):
        rng = np.random.default_rng(81)
        c = PointCloud(rng.normal(size=(50, 3)))
        far = PointCloud(c.points + 100.0)
        assert overlap_fraction(far, c, overlap_dist=1.0) == 0.0

    def test_half_overlap_fixture(self):
        rng = np.random.default_rng(82)
        base = rng.normal(size=(60, 3))
        reference = PointCloud(base)
        template = PointCloud(np.vstack([base[:30], base[:30] + 500.0]))
        assert overlap_fraction(template, reference, overlap_dist=1e-9) == 0.5

    def test_monotone_in_distance(self):
        rng = np.random.default_rng(83)
        a = PointCloud(rng.normal(size=(80, 3)))
        b = PointCloud(rng.normal(size=(80, 3)))
        fracs = [overlap_fraction(a, b, d) for d in (0.01, 0.1, 0.5, 1.0, 5.0)]
        assert all(x <= y for x, y in zip(fracs, fracs[1:]))


class TestMerge:
    def test_self_merge_collapses_duplicates(self):
        rng = np.random.default_rng(84)
        c = PointCloud(rng.normal(size=(40, 3)))
        merged = merge(c, c, merge_dedup_dist=1e-6)
        assert len(merged) == len(c)
        assert np.allclose(merged.points, c.points)

    def test_zero_radius_concatenates(self):
        a = PointCloud([[0.0, 0, 0], [1.0, 0, 0]])
        b = PointCloud([[10.0, 0, 0], [0.0, 0, 0]])  # one exact duplicate
        merged = merge(a, b, merge_dedup_dist=0.0)
        assert len(merged) == 4

    def test_overlapping_lines_deduplicate(self):
        xs = np.arange(10, dtype=float)
        a = PointCloud(np.column_stack([xs, np.zeros(10), np.zeros(10)]))
        b = PointCloud(np.column_stack([xs + 5.0, np.zeros(10), np.zeros(10)]))
        merged = merge(a, b, merge_dedup_dist=0.25)
        assert len(merged) == 15  # 10 + 10 - 5 shared

    def test_midpoint_replacement(self):
        a = PointCloud([[0.0, 0.0, 0.0]])
        b = PointCloud([[0.2, 0.0, 0.0]])
        merged = merge(a, b, merge_dedup_dist=0.5)
        assert len(merged) == 1
        assert np.allclose(merged.points[0], [0.1, 0.0, 0.0])

    def test_discarded_points_keep_masses(self):
        a = PointCloud([[0.0, 0, 0]], masses=[2.0])
        b = PointCloud([[5.0, 0, 0]], masses=[3.0])
        merged = merge(a, b, merge_dedup_dist=0.1)
        assert sorted(merged.masses.tolist()) == [2.0, 3.0]


class TestMedianSpacing:
    def test_regular_grid(self):
        xs = np.arange(10, dtype=float)
        line = PointCloud(np.column_stack([xs, np.zeros(10), np.zeros(10)]))
        assert median_nn_spacing(line) == pytest.approx(1.0)


class TestRegisterPair:
    def test_identical_scans(self):
        scan = sphere_band(500, seed=90)
        pair = register_pair(scan, scan, small_config(seed=1))
        assert pair.overlap == 1.0
        assert rotation_error(np.eye(3), pair.transform.rotation) < 0.2

    def test_known_pose_recovery_with_partial_overlap(self):
        a = sphere_band(800, seed=91, azimuth_range=(0.0, math.radians(200.0)), bump=0.1)
        b = sphere_band(
            800, seed=92, azimuth_range=(math.radians(40.0), math.radians(240.0)), bump=0.1
        )
        gt = RigidTransform(rodrigues(math.radians(25.0), np.array([0.0, 0, 1.0])), np.zeros(3))
        reference = b.transformed(gt)
        pair = register_pair(a, reference, small_config(seed=2))
        assert rotation_error(gt.rotation, pair.transform.rotation) < 1.0
        assert pair.overlap > 0.5

    def test_junk_scan_low_overlap(self):
        rng = np.random.default_rng(93)
        reference = sphere_band(700, seed=94)
        junk = PointCloud(rng.uniform(-1, 1, size=(300, 3)) * reference.bounding_diagonal())
        pair = register_pair(junk, reference, small_config(seed=3))
        assert pair.overlap < 0.3

    def test_refined_energy_not_worse_than_coarse(self):
        scan = sphere_band(600, seed=95)
        turned = scan.transformed(
            RigidTransform(rodrigues(0.3, np.array([0.0, 0, 1.0])), np.array([0.1, 0, 0]))
        )
        pair = register_pair(scan, turned, small_config(seed=4))
        assert pair.nfi_refined <= pair.nfi_coarse


class TestMultiviewRegister:
    def test_two_identical_scans(self):
        scan = sphere_band(500, seed=96)
        report = multiview_register([scan, scan], small_config(seed=5))
        assert len(report.per_scan) == 1
        assert report.per_scan[0].status == "accepted"
        # full dedup: the merged model stays at single-scan density
        assert len(report.model) <= 2 * len(scan)

    def test_turntable_sequence_all_accepted(self):
        scans, gt = turntable_views(n_views=5, points_per_view=600, seed=6)
        report = multiview_register(scans, small_config(seed=7))
        assert all(r.status == "accepted" for r in report.per_scan)
        for rec in report.per_scan:
            assert rotation_error(gt[rec.scan_id].rotation, rec.transform.rotation) < 1.0
            assert (
                translation_error(gt[rec.scan_id].translation, rec.transform.translation)
                < 0.005 * scans[0].bounding_diagonal()
            )

    def test_junk_scan_discarded_and_model_unaffected(self):
        scans, _ = turntable_views(n_views=4, points_per_view=500, seed=8)
        rng = np.random.default_rng(97)
        junk = PointCloud(rng.uniform(-3, 3, size=(400, 3)) + 10.0)
        with_junk = scans[:2] + [junk] + scans[2:]
        report = multiview_register(with_junk, small_config(seed=9))
        statuses = [r.status for r in report.per_scan]
        assert statuses[1] == "discarded"
        assert statuses.count("accepted") == 3
        clean_report = multiview_register(scans, small_config(seed=9))
        assert len(report.model) == len(clean_report.model)

    def test_every_scan_reported_once(self):
        scans, _ = turntable_views(n_views=4, points_per_view=400, seed=10)
        report = multiview_register(scans, small_config(seed=11))
        assert [r.scan_id for r in report.per_scan] == [1, 2, 3]

    def test_rerun_reproducibility(self):
        scans, _ = turntable_views(n_views=3, points_per_view=400, seed=12)
        r1 = multiview_register(scans, small_config(seed=13))
        r2 = multiview_register(scans, small_config(seed=13))
        assert len(r1.model) == len(r2.model)
        assert np.array_equal(r1.model.points, r2.model.points)
        for a, b in zip(r1.per_scan, r2.per_scan):
            assert a.status == b.status
            assert np.array_equal(a.transform.rotation, b.transform.rotation)
            assert a.overlap == b.overlap and a.nfi == b.nfi

    def test_report_text_contains_errors_with_ground_truth(self):
        scans, gt = turntable_views(n_views=3, points_per_view=400, seed=14)
        report = multiview_register(scans, small_config(seed=15))
        text = report.report_text(ground_truth=gt)
        lines = text.strip().splitlines()
        assert len(lines) == 3  # header + 2 incoming scans
        assert lines[0].startswith("scan_id status overlap")
        assert "accepted" in lines[1]

    def test_rejects_single_scan(self):
        scan = sphere_band(100, seed=98)
        with pytest.raises(ValueError):
            multiview_register([scan], small_config())

    def test_absolute_count_mode(self):
        scan = sphere_band(400, seed=99)
        config = small_config(seed=16)
        config.overlap_count = 100
        report = multiview_register([scan, scan], config)
        assert report.per_scan[0].status == "accepted"
        config.overlap_count = 10 * len(scan)
        report = multiview_register([scan, scan], config)
        assert report.per_scan[0].status == "discarded"