"""Metrics, hull surfaces, and the re-estimation robustness sweep."""

import json

import numpy as np
import pytest

from qdfolio import Portfolio, QdConfig, risk_return, run_qd
from qdfolio.analytics import (
    EstimatorSettings,
    archive_profiles,
    compute_metrics,
    convex_hull_2d,
    hull_area_2d,
    modified_coverage,
    project_simplex_3d,
    qd_scores,
    robustness_sweep,
    rr_hull_area,
    sharpe_stats,
    weight_hull_area_3assets,
)
from qdfolio.behavior import CvtPartition
from qdfolio.core import RiskReturnPoint
from qdfolio.engine import Archive, EliteRecord
from qdfolio.estimation import sample_estimates
from tests.test_estimation import make_window, random_window


def hand_archive(fitnesses, near_flags, n_assets=3):
    """Archive with one occupied niche per (fitness, near) pair."""
    m = len(fitnesses)
    centroids = np.column_stack([np.linspace(0.1, 0.9, m)] * n_assets)
    part = CvtPartition(centroids=centroids, seed=0, behavior="B1")
    cfg = QdConfig(M=m, n_max=1, n_cvt=m)
    w0 = Portfolio(weights=np.full(n_assets, 1.0 / n_assets))
    a = Archive(part, n_assets, w0, RiskReturnPoint(mu=0.1, sigma=0.1), cfg)
    for i, (f, near) in enumerate(zip(fitnesses, near_flags)):
        a.occupied[i] = True
        a.weights[i] = w0.weights
        a.fitness[i] = f
        a.mu[i] = 0.1
        a.sigma[i] = 0.1
        a.near_optimal[i] = near
    return a


class TestCoverage:
    def test_empty_archive(self):
        a = hand_archive([0.0], [False])
        a.occupied[0] = False
        assert modified_coverage(a) == 0.0

    def test_all_near_optimal(self):
        a = hand_archive([1.0, 2.0, 3.0], [True, True, True])
        assert modified_coverage(a) == 1.0

    def test_fraction(self):
        a = hand_archive([1.0, 2.0, 3.0, 4.0], [True, False, True, False])
        assert modified_coverage(a) == 0.5


class TestQdScores:
    def test_single_niche(self):
        q1, qm = qd_scores(hand_archive([-3.0], [False]))
        assert q1 == 1.0 and qm == 0.0

    def test_all_equal(self):
        q1, _ = qd_scores(hand_archive([2.0] * 5, [False] * 5))
        assert q1 == 5.0

    def test_hand_normalization(self):
        q1, qm = qd_scores(hand_archive([-2.0, -1.0, 0.0], [False] * 3))
        assert q1 == pytest.approx(1.5)
        assert qm == 0.0

    def test_mod_bounded_by_full(self):
        a = hand_archive([-2.0, -1.0, 0.5, 1.0], [False, True, True, False])
        q1, qm = qd_scores(a)
        assert qm <= q1 + 1e-9

    def test_empty_error(self):
        a = hand_archive([0.0], [False])
        a.occupied[0] = False
        with pytest.raises(ValueError):
            qd_scores(a)


class TestArchiveProfiles:
    def test_threshold_extremes(self):
        a = hand_archive([-2.0, -1.0, 1.0, 2.0], [False, False, True, True])
        ap1, ap2, _, _ = archive_profiles(a, thresholds=[-10.0, 10.0])
        assert ap1[0][1] == 1.0 and ap1[1][1] == 0.0
        assert ap2[0][1] == 1.0 and ap2[1][1] == 0.0

    def test_midpoint_counting_oracle(self):
        a = hand_archive([-3.0, -1.0, 1.0, 3.0], [False, False, True, True])
        ap1, ap2, ap1_counts, ap2_counts = archive_profiles(a, thresholds=[-2.0, 0.0, 2.0])
        assert [c for _, c in ap1_counts] == [1, 0, 0]
        assert [c for _, c in ap2_counts] == [2, 2, 1]
        assert [p for _, p in ap1] == [0.5, 0.0, 0.0]
        assert [p for _, p in ap2] == [1.0, 1.0, 0.5]

    def test_curves_non_increasing(self):
        a = hand_archive(list(np.linspace(-1, 1, 9)), [i % 2 == 0 for i in range(9)])
        ap1, ap2, _, _ = archive_profiles(a)
        for curve in (ap1, ap2):
            props = [p for _, p in curve]
            assert all(b <= a_ for a_, b in zip(props, props[1:]))

    def test_rejects_descending_thresholds(self):
        a = hand_archive([0.0, 1.0], [False, True])
        with pytest.raises(ValueError):
            archive_profiles(a, thresholds=[1.0, 0.0])


class TestHullArea:
    def test_unit_square(self):
        assert hull_area_2d([[0, 0], [1, 0], [1, 1], [0, 1]]) == pytest.approx(1.0)

    def test_right_triangle(self):
        assert hull_area_2d([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5)

    def test_interior_points_ignored(self):
        pts = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.7]]
        assert hull_area_2d(pts) == pytest.approx(1.0)

    def test_collinear_zero(self):
        assert hull_area_2d([[0, 0], [1, 1], [2, 2], [3, 3]]) == 0.0

    def test_too_few_points(self):
        assert hull_area_2d([[0, 0], [1, 1]]) == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hull_area_2d([[0, 0], [np.inf, 1], [1, 0]])

    def test_matches_fan_triangulation_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            r = np.sqrt(rng.uniform(size=50))
            th = rng.uniform(0, 2 * np.pi, size=50)
            pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
            hull = convex_hull_2d(pts)
            # Fan triangulation from the first hull vertex.
            o = hull[0]
            fan = 0.0
            for a, b in zip(hull[1:], hull[2:]):
                fan += 0.5 * abs((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))
            assert hull_area_2d(pts) == pytest.approx(fan, abs=1e-12)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(23)
        pts = rng.uniform(size=(40, 2))
        base = hull_area_2d(pts)
        th = 0.83
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        moved = pts @ rot.T + np.array([5.0, -2.0])
        assert hull_area_2d(moved) == pytest.approx(base, abs=1e-12)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(29)
        pts = rng.uniform(size=(40, 2))
        assert hull_area_2d(3.0 * pts) == pytest.approx(9.0 * hull_area_2d(pts), abs=1e-12)


class TestWeightHull:
    def test_vertex_triangle(self):
        # In the dropped-coordinate plane the full simplex face is the
        # triangle (0,0), (1,0), (0,1) with area 1/2.
        ws = [Portfolio(weights=np.eye(3)[i]) for i in range(3)]
        assert weight_hull_area_3assets(ws) == pytest.approx(0.5)

    def test_identical_portfolios(self):
        ws = [Portfolio(weights=np.array([0.2, 0.3, 0.5]))] * 5
        assert weight_hull_area_3assets(ws) == 0.0

    def test_projection_drops_last_coordinate(self):
        w = np.array([[0.2, 0.3, 0.5]])
        assert np.allclose(project_simplex_3d(w), [[0.2, 0.3]])

    def test_projection_rejects_other_dims(self):
        with pytest.raises(ValueError):
            project_simplex_3d(np.ones((2, 4)) / 4)


class TestRrHullAndSharpe:
    @staticmethod
    def rec(mu, sigma, near=True):
        w = Portfolio(weights=np.array([1 / 3, 1 / 3, 1 / 3]))
        from qdfolio import BehaviorDescriptor

        return EliteRecord(
            w=w,
            bd=BehaviorDescriptor(values=w.weights),
            fitness=0.0,
            rr=RiskReturnPoint(mu=mu, sigma=sigma),
            near_optimal=near,
        )

    def test_right_triangle_area(self):
        recs = [self.rec(0.0, 0.0), self.rec(0.0, 0.01), self.rec(0.01, 0.0)]
        assert rr_hull_area(recs) == pytest.approx(5e-5, abs=1e-15)

    def test_collinear_zero(self):
        recs = [self.rec(0.1, 0.1), self.rec(0.2, 0.2), self.rec(0.3, 0.3)]
        assert rr_hull_area(recs) == 0.0

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            rr_hull_area([self.rec(0.1, 0.1)])

    def test_sharpe_single_record(self):
        mean, std = sharpe_stats([self.rec(0.12, 0.10)])
        assert mean == pytest.approx(1.2)
        assert std == 0.0

    def test_sharpe_identical_records(self):
        mean, std = sharpe_stats([self.rec(0.12, 0.10)] * 4, rf=0.02)
        assert mean == pytest.approx(1.0)
        assert std == 0.0

    def test_sharpe_empty_error(self):
        with pytest.raises(ValueError):
            sharpe_stats([])


class TestComputeMetrics:
    def test_report_fields_and_serialization(self, tmp_path, toy_est, toy_w0):
        a = run_qd(QdConfig(M=20, n_max=5000, n_cvt=500, seed=0), toy_est, None, toy_w0)
        report = compute_metrics(a)
        assert 0.0 <= report.coverage_mod <= 1.0
        assert report.qd_score_mod <= report.qd_score1 + 1e-9
        assert report.hull_area_weights is not None
        jpath = tmp_path / "m.json"
        report.save_json(jpath)
        assert json.loads(jpath.read_text())["coverage_mod"] == report.coverage_mod
        cpath = tmp_path / "m.csv"
        report.save_tidy_csv(cpath)
        assert cpath.read_text().startswith("metric,param,value")


class TestRobustnessSweep:
    @pytest.fixture
    def setup(self):
        rng = np.random.default_rng(31)
        # Positive drift keeps the re-estimated reference return positive on
        # every trailing window, which the nesting check below relies on.
        win = make_window(rng.normal(0.002, 0.01, size=(120, 4)))
        est = sample_estimates(win)
        w0 = Portfolio(weights=np.full(4, 0.25))
        cfg = QdConfig(M=15, n_max=4000, n_cvt=300, c=0.1, seed=0)
        a = run_qd(cfg, est, None, w0)
        return a, win, cfg

    def test_self_consistency(self, setup):
        a, win, cfg = setup
        out = robustness_sweep(a, win, [win.n_days], [cfg.c], EstimatorSettings())
        assert out[0, 0] == pytest.approx(modified_coverage(a))

    def test_nested_in_c(self, setup):
        a, win, _ = setup
        out = robustness_sweep(a, win, [60, 120], [0.02, 0.05, 0.1, 0.2], EstimatorSettings())
        # The generated window has positive reference returns at every T, so
        # larger thresholds can only widen the near-optimality region.
        assert np.all(np.diff(out, axis=1) >= 0)

    def test_rejects_oversized_window(self, setup):
        a, win, _ = setup
        with pytest.raises(ValueError):
            robustness_sweep(a, win, [200], [0.1], EstimatorSettings())
