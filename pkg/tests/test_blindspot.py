import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_cloud, with_attributes
from limrsf.blindspot import (
    GroundTruthSet,
    MappedSet,
    detection_metrics,
    detection_metrics_from_counts,
    estimate_point_density,
    ground_truth_from_boxes,
    identify_low_density,
    map_blind_spots,
    nearest_rank_threshold,
)
from limrsf.errors import ValidationError
from limrsf.geometry import PointCloud
from limrsf.mesh import TriangleMesh


class TestDensity:
    def test_counts_match_brute_and_include_self(self, rng):
        cloud = random_cloud(rng, 50)
        profile = estimate_point_density(cloud, 0.4)
        expected = oracles.brute_count_within(cloud.points, cloud.points, 0.4)
        assert np.array_equal(profile.densities, expected)
        assert profile.densities.min() >= 1

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValidationError):
            estimate_point_density(PointCloud(points=np.zeros((0, 3))), 0.5)


class TestNearestRank:
    def test_small_cases(self):
        d = np.array([10, 20, 30, 40])
        # rank = ceil(60 * 4 / 100) = ceil(2.4) = 3
        assert nearest_rank_threshold(d, 60.0) == 30.0
        # rank = ceil(25 * 4 / 100) = 1
        assert nearest_rank_threshold(d, 25.0) == 10.0
        assert nearest_rank_threshold(d, 99.0) == 40.0

    def test_exact_integer_rank_boundary(self):
        # 60 * 5 / 100 = 3.0 exactly: rank 3, not 4
        d = np.array([1, 2, 3, 4, 5])
        assert nearest_rank_threshold(d, 60.0) == 3.0

    def test_unsorted_input(self):
        d = np.array([40, 10, 30, 20])
        assert nearest_rank_threshold(d, 60.0) == 30.0

    def test_percentile_bounds(self):
        d = np.array([1.0, 2.0])
        with pytest.raises(ValidationError):
            nearest_rank_threshold(d, 0.0)
        with pytest.raises(ValidationError):
            nearest_rank_threshold(d, 100.0)
        with pytest.raises(ValidationError):
            nearest_rank_threshold(np.zeros(0), 50.0)

    @settings(max_examples=100, deadline=None)
    @given(
        values=st.lists(st.integers(0, 50), min_size=1, max_size=40),
        percentile=st.floats(0.1, 99.9),
    )
    def test_matches_literal_definition(self, values, percentile):
        import math

        arr = np.array(values, dtype=np.int64)
        rank = math.ceil((percentile * arr.size) / 100.0)
        expected = float(sorted(values)[rank - 1])
        assert nearest_rank_threshold(arr, percentile) == expected


class TestGroundTruth:
    def test_strictly_below_threshold(self):
        profile_densities = np.array([1, 2, 3, 3, 9])
        from limrsf.blindspot import DensityProfile

        truth = identify_low_density(DensityProfile(profile_densities, 0.1), 60.0)
        # threshold = value at rank ceil(3.0) = 3; strictly below keeps 1 and 2
        assert truth.threshold == 3.0
        assert truth.indices.tolist() == [0, 1]

    def test_boxes_closed_collar(self):
        pts = np.array(
            [
                [0.5, 0.5, 0.5],  # inside
                [1.5, 0.5, 0.5],  # 0.5 beyond the x face: exactly at the collar
                [1.6, 0.5, 0.5],  # 0.6 beyond: outside
                [2.0, 2.0, 2.0],  # far corner
            ]
        )
        cloud = PointCloud(points=pts)
        got = ground_truth_from_boxes(cloud, [((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))], 0.5)
        assert got.tolist() == [0, 1]

    def test_multiple_boxes_union(self):
        pts = np.array([[0.0, 0, 0], [5.0, 0, 0], [10.0, 0, 0]])
        cloud = PointCloud(points=pts)
        boxes = [((-1.0, -1, -1), (1.0, 1, 1)), ((9.0, -1, -1), (11.0, 1, 1))]
        got = ground_truth_from_boxes(cloud, boxes, 0.1)
        assert got.tolist() == [0, 2]

    def test_collar_validation(self, rng):
        with pytest.raises(ValidationError):
            ground_truth_from_boxes(random_cloud(rng, 3), [], 0.0)


class TestMapping:
    def highlighted_mesh(self, positions, flags):
        positions = np.asarray(positions, dtype=np.float64)
        tris = (
            np.array([[i, i + 1, i + 2] for i in range(len(positions) - 2)])
            if len(positions) >= 3
            else np.zeros((0, 3), dtype=np.int64)
        )
        return TriangleMesh(
            vertices=positions, triangles=tris, highlight=np.asarray(flags, dtype=bool)
        )

    def test_matches_brute_union(self, rng):
        cloud = random_cloud(rng, 80)
        verts = rng.uniform(-1, 1, size=(6, 3))
        flags = [True, False, True, True, False, False]
        mesh = self.highlighted_mesh(verts, flags)
        mapped = map_blind_spots(mesh, cloud, 0.5)
        expected = oracles.brute_mapped_indices(cloud.points, verts[np.array(flags)], 0.5)
        assert np.array_equal(mapped.indices, expected)

    def test_no_highlights_maps_nothing(self, rng):
        cloud = random_cloud(rng, 10)
        mesh = self.highlighted_mesh(np.zeros((3, 3)), [False, False, False])
        assert map_blind_spots(mesh, cloud, 1.0).indices.size == 0

    def test_requires_highlight_flags(self, rng):
        from conftest import make_tetrahedron

        with pytest.raises(ValidationError):
            map_blind_spots(make_tetrahedron(), random_cloud(rng, 10), 0.5)

    def test_radius_validation(self, rng):
        mesh = self.highlighted_mesh(np.zeros((3, 3)), [True, False, False])
        with pytest.raises(ValidationError):
            map_blind_spots(mesh, random_cloud(rng, 5), 0.0)


class TestMetrics:
    def test_known_counts(self):
        r = detection_metrics_from_counts(3, 1, 2)
        assert r.precision == 0.75
        assert r.recall == 0.6
        assert r.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
        assert r.iou == 0.5

    def test_perfect_and_empty(self):
        perfect = detection_metrics_from_counts(10, 0, 0)
        assert (perfect.precision, perfect.recall, perfect.f1, perfect.iou) == (1.0, 1.0, 1.0, 1.0)
        empty = detection_metrics_from_counts(0, 0, 0)
        assert (empty.precision, empty.recall, empty.f1, empty.iou) == (0.0, 0.0, 0.0, 0.0)

    def test_zero_tp_with_fp_fn(self):
        r = detection_metrics_from_counts(0, 5, 7)
        assert r.precision == 0.0 and r.recall == 0.0 and r.f1 == 0.0
        assert r.iou == 0.0

    def test_count_validation(self):
        with pytest.raises(ValidationError):
            detection_metrics_from_counts(-1, 0, 0)
        with pytest.raises(ValidationError):
            detection_metrics_from_counts(1.0, 0, 0)

    def test_to_dict_round_trip(self):
        r = detection_metrics_from_counts(3, 1, 2)
        d = r.to_dict()
        assert set(d) == {"tp", "fp", "fn", "precision", "recall", "f1", "iou"}
        assert d["tp"] == 3 and d["iou"] == 0.5

    @settings(max_examples=100, deadline=None)
    @given(
        m=st.sets(st.integers(0, 30)),
        g=st.sets(st.integers(0, 30)),
    )
    def test_set_semantics(self, m, g):
        mapped = MappedSet(indices=np.array(sorted(m), dtype=np.int64), map_radius=1.0)
        truth = GroundTruthSet(
            indices=np.array(sorted(g), dtype=np.int64), threshold=1.0, percentile=50.0
        )
        r = detection_metrics(mapped, truth)
        assert r.tp == len(m & g)
        assert r.fp == len(m - g)
        assert r.fn == len(g - m)

    def test_duplicate_indices_collapse(self):
        mapped = MappedSet(indices=np.array([1, 1, 2, 3, 3]), map_radius=1.0)
        truth = GroundTruthSet(indices=np.array([2, 2, 4]), threshold=1.0, percentile=50.0)
        r = detection_metrics(mapped, truth)
        assert (r.tp, r.fp, r.fn) == (1, 2, 1)
