"""Tests for sensor envelopes, the visibility predicate and coverage matrices."""

import numpy as np
import pytest

from src.geometry.spatial_index import build_spatial_index
from src.geometry.types import TriangleMesh
from src.planning.candidates import Viewpoint
from src.planning.errors import EmptyInput
from src.planning.sampling import SurfaceSample, sample_surface
from src.planning.sensors import AgentClass, SensorModel
from src.planning.visibility import (
    OCCLUSION_ABS_TOL,
    OCCLUSION_REL_TOL,
    CoverageMatrix,
    build_coverage,
    sensors_by_class,
    visibility_test,
)
from src.utils import scenes

UP = (0.0, 0.0, 1.0)


def sample(point, normal=UP) -> SurfaceSample:
    return SurfaceSample(id=0, point=tuple(point), normal=tuple(normal), triangle_id=0, weight_area=1.0)


def station(x, y, z=1.5, vp_id=0, agent_class=AgentClass.GROUND, heading=None) -> Viewpoint:
    return Viewpoint(vp_id, (x, y, z), agent_class, heading)


@pytest.fixture
def sensor():
    return SensorModel.default_ground()


class TestSensorModel:
    def test_defaults_are_valid(self):
        ground, aerial = SensorModel.default_ground(), SensorModel.default_aerial()
        assert ground.panoramic and aerial.panoramic
        assert aerial.vertical_fov == (-90.0, 30.0)
        assert SensorModel.default_for(AgentClass.GROUND) == ground

    @pytest.mark.parametrize(
        "overrides",
        [
            {"min_range": 5.0, "max_range": 1.0},
            {"max_incidence": 0.0},
            {"min_elevation": 10.0, "max_elevation": -10.0},
            {"horizontal_fov": 400.0},
            {"range_noise_sigma": -1.0},
        ],
    )
    def test_invalid_envelope(self, overrides):
        params = dict(min_range=0.5, max_range=50.0, max_incidence=80.0, min_elevation=-45.0, max_elevation=45.0)
        params.update(overrides)
        with pytest.raises(ValueError):
            SensorModel(**params)


class TestVisibilityPredicate:
    """Range, field of view, incidence and occlusion gates."""

    def test_oblique_floor_sample_visible(self, flat_index, sensor):
        assert visibility_test(station(2, 5), sample((5, 5, 0)), sensor, flat_index)

    def test_straight_down_outside_vertical_fov(self, flat_index, sensor):
        assert not visibility_test(station(5, 5), sample((5, 5, 0)), sensor, flat_index)

    def test_grazing_angle_rejected(self, flat_index, sensor):
        assert not visibility_test(station(0, 5, 0.5), sample((8, 5, 0)), sensor, flat_index)

    def test_back_face_rejected(self, flat_index, sensor):
        assert not visibility_test(station(2, 5), sample((5, 5, 0), normal=(0, 0, -1)), sensor, flat_index)

    def test_out_of_range(self, sensor):
        big = scenes.flat_site(100.0)
        index = build_spatial_index(big)
        assert visibility_test(station(10, 10, 20), sample((50, 10, 0)), sensor, index)
        assert not visibility_test(station(10, 10, 20), sample((80, 10, 0)), sensor, index)

    def test_too_close(self, flat_index, sensor):
        assert not visibility_test(station(5, 5, 0.3), sample((5.3, 5, 0)), sensor, flat_index)

    def test_occluded_by_block(self, sensor):
        mesh = TriangleMesh.concatenate([scenes.flat_site(10.0), scenes.box_solid((4, 0, 0), (5, 10, 3))])
        index = build_spatial_index(mesh)
        assert not visibility_test(station(2, 5), sample((8, 5, 0)), sensor, index)
        assert visibility_test(station(2, 5), sample((3.5, 5, 0)), sensor, index)

    def test_horizontal_fov_uses_heading(self, flat_index):
        narrow = SensorModel(0.5, 50.0, 80.0, -90.0, 90.0, horizontal_fov=90.0)
        target = sample((8, 5, 0))
        assert visibility_test(station(2, 5, heading=0.0), target, narrow, flat_index)
        assert not visibility_test(station(2, 5, heading=180.0), target, narrow, flat_index)

    def test_aerial_looks_down(self, flat_index):
        aerial = SensorModel.default_aerial()
        drone = station(5, 5, 10.0, agent_class=AgentClass.AERIAL)
        assert visibility_test(drone, sample((5, 5, 0)), aerial, flat_index)
        assert visibility_test(drone, sample((7, 3, 0)), aerial, flat_index)


class TestCoverageMatrix:
    """Batch visibility rows and matrix helpers."""

    @pytest.fixture
    def matrix(self, flat_mesh, flat_index):
        samples = sample_surface(flat_mesh, 1.0)
        candidates = [station(2, 5, vp_id=10), station(8, 5, vp_id=11), station(5, 5, 10.0, 12, AgentClass.AERIAL)]
        sensors = sensors_by_class(SensorModel.default_ground(), SensorModel.default_aerial())
        return build_coverage(candidates, samples, sensors, flat_index)

    def test_shape_and_ids(self, matrix):
        assert matrix.bits.shape == (3, len(matrix.samples))
        np.testing.assert_array_equal(matrix.ids, [10, 11, 12])
        assert matrix.row_of(11) == 1

    def test_rows_match_predicate(self, matrix, flat_index):
        sensors = sensors_by_class(SensorModel.default_ground(), SensorModel.default_aerial())
        for r, vp in enumerate(matrix.candidates):
            for s in list(matrix.samples)[::7]:
                assert matrix.bits[r, s.id] == visibility_test(vp, s, sensors[vp.agent_class], flat_index)

    def test_workers_do_not_change_result(self, matrix, flat_index):
        sensors = sensors_by_class(SensorModel.default_ground(), SensorModel.default_aerial())
        parallel = build_coverage(matrix.candidates, matrix.samples, sensors, flat_index, workers=4)
        np.testing.assert_array_equal(parallel.bits, matrix.bits)

    def test_union_and_counts(self, matrix):
        both = matrix.union([10, 11])
        np.testing.assert_array_equal(both, matrix.bits[0] | matrix.bits[1])
        assert not matrix.union([]).any()
        np.testing.assert_array_equal(matrix.hit_counts(), matrix.bits.sum(axis=0))

    def test_row_coverage(self, matrix):
        weights = matrix.samples.weights
        expected = (matrix.bits * weights).sum(axis=1) / weights.sum()
        np.testing.assert_allclose(matrix.row_coverage(weights), expected)

    def test_subset_and_stack(self, matrix):
        sub = matrix.subset([12, 10])
        np.testing.assert_array_equal(sub.ids, [12, 10])
        np.testing.assert_array_equal(sub.bits[1], matrix.bits[0])
        assert len(sub.stacked(matrix).candidates) == 5

    def test_unknown_row(self, matrix):
        with pytest.raises(KeyError):
            matrix.row_of(99)

    def test_shape_mismatch(self, matrix):
        with pytest.raises(ValueError):
            CoverageMatrix(matrix.candidates, matrix.samples, matrix.bits[:2])

    def test_empty_input(self, flat_mesh, flat_index):
        samples = sample_surface(flat_mesh, 1.0)
        sensors = sensors_by_class(SensorModel.default_ground(), SensorModel.default_aerial())
        with pytest.raises(EmptyInput):
            build_coverage([], samples, sensors, flat_index)


class TestVisibilityInvariants:
    """Properties that hold for every viewpoint and sample of a cluttered room."""

    @pytest.fixture(scope="class")
    def room(self):
        mesh = scenes.partitioned_room()
        index = build_spatial_index(mesh)
        samples = sample_surface(mesh, 0.75)
        candidates = [
            station(2.5, 3.0, vp_id=0),
            station(7.5, 1.0, vp_id=1),
            station(5.0, 3.0, 1.5, vp_id=2),
            station(9.0, 5.0, 0.8, vp_id=3),
        ]
        return index, samples, candidates

    @staticmethod
    def coverage(room, sensor):
        index, samples, candidates = room
        return build_coverage(candidates, samples, sensors_by_class(sensor, sensor), index).bits

    def test_longer_range_never_loses_samples(self, room):
        near = self.coverage(room, SensorModel(0.1, 4.0, 85.0, -90.0, 90.0))
        far = self.coverage(room, SensorModel(0.1, 8.0, 85.0, -90.0, 90.0))
        assert not np.any(near & ~far)
        assert far.sum() > near.sum()

    def test_wider_incidence_never_loses_samples(self, room):
        strict = self.coverage(room, SensorModel(0.1, 60.0, 45.0, -90.0, 90.0))
        loose = self.coverage(room, SensorModel(0.1, 60.0, 85.0, -90.0, 90.0))
        assert not np.any(strict & ~loose)
        assert loose.sum() > strict.sum()

    def test_visible_samples_have_nothing_in_front(self, room):
        index, samples, candidates = room
        bits = self.coverage(room, SensorModel(0.1, 60.0, 85.0, -90.0, 90.0))
        for row, vp in enumerate(candidates):
            origin = np.array(vp.position)
            for s in np.flatnonzero(bits[row])[::5]:
                delta = samples.points[s] - origin
                d = float(np.linalg.norm(delta))
                tol = max(OCCLUSION_ABS_TOL, OCCLUSION_REL_TOL * d)
                hit = index.ray_cast_exhaustive(origin, delta / d, d + tol)
                assert hit is not None
                assert abs(hit.t - d) <= tol

    def test_blocked_samples_are_blocked_exhaustively(self, room):
        index, samples, candidates = room
        sensor = SensorModel(0.1, 60.0, 85.0, -90.0, 90.0)
        bits = self.coverage(room, sensor)
        vp = candidates[0]
        origin = np.array(vp.position)
        # Everything behind the partition that passes the sensor gates but is not set.
        for s in np.flatnonzero(~bits[0] & (samples.points[:, 0] > 5.5))[::5]:
            delta = samples.points[s] - origin
            d = float(np.linalg.norm(delta))
            tol = max(OCCLUSION_ABS_TOL, OCCLUSION_REL_TOL * d)
            hit = index.ray_cast_exhaustive(origin, delta / d, d + tol)
            in_front = hit is not None and abs(hit.t - d) <= tol
            facing = float(np.dot(samples.normals[s], -delta / d)) > np.cos(np.radians(85.0))
            assert not (in_front and facing)
