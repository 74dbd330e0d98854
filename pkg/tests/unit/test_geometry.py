"""Tests for mesh/cloud containers, the BVH and neighbour search."""

import numpy as np
import pytest

from src.geometry.neighbors import PointLocator, nearest_point, nearest_point_exhaustive
from src.geometry.spatial_index import build_spatial_index, ray_cast
from src.geometry.topology import mesh_topology_report, triangle_components
from src.geometry.types import (
    EmptyCloud,
    EmptyMesh,
    InvalidGeometry,
    PointCloud,
    TriangleMesh,
)
from src.utils import scenes


class TestContainers:
    """Validation and derived quantities of PointCloud and TriangleMesh."""

    def test_points_must_be_n_by_3(self):
        with pytest.raises(InvalidGeometry, match="shape"):
            PointCloud(np.zeros((4, 2)))

    def test_nan_coordinates_rejected(self):
        with pytest.raises(InvalidGeometry, match="NaN"):
            PointCloud([[0.0, np.nan, 0.0]])

    def test_normals_length_must_match(self):
        with pytest.raises(InvalidGeometry, match="does not match"):
            PointCloud(np.zeros((3, 3)), normals=np.zeros((2, 3)))

    def test_triangle_index_out_of_range(self):
        with pytest.raises(InvalidGeometry, match="out of range"):
            TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])

    def test_arrays_are_read_only(self, flat_mesh):
        with pytest.raises(ValueError):
            flat_mesh.vertices[0, 0] = 1.0

    def test_face_areas_and_normals(self, flat_mesh):
        assert flat_mesh.total_area == pytest.approx(100.0)
        np.testing.assert_allclose(flat_mesh.face_normals, [[0, 0, 1], [0, 0, 1]])

    def test_degenerate_face_has_zero_normal(self):
        mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        assert mesh.face_areas[0] == 0.0
        np.testing.assert_array_equal(mesh.face_normals[0], [0, 0, 0])

    def test_empty_mesh_bounds(self):
        with pytest.raises(EmptyMesh):
            TriangleMesh.empty().bounds()

    def test_empty_cloud_bounds(self):
        with pytest.raises(EmptyCloud):
            PointCloud(np.empty((0, 3))).bounds()

    def test_concatenate_offsets_indices(self, unit_box):
        both = TriangleMesh.concatenate([unit_box, unit_box.transformed(offset=(5, 0, 0))])
        assert len(both) == 2 * len(unit_box)
        assert both.triangles.max() == 2 * len(unit_box.vertices) - 1
        assert both.bounds()[1][0] == pytest.approx(6.0)

    def test_cloud_concatenate_drops_partial_normals(self):
        a = PointCloud(np.zeros((2, 3)), normals=np.tile([0, 0, 1.0], (2, 1)))
        b = PointCloud(np.ones((1, 3)))
        merged = PointCloud.concatenate([a, b])
        assert len(merged) == 3
        assert not merged.has_normals

    def test_sphere_normals_point_outward(self, sphere_mesh):
        dots = np.einsum("ij,ij->i", sphere_mesh.face_centroids, sphere_mesh.face_normals)
        assert np.all(dots > 0)


class TestRayCast:
    """Nearest-hit ray queries against the BVH."""

    def test_straight_down_hits_floor(self, flat_index):
        hit = ray_cast(flat_index, (5, 5, 10), (0, 0, -1), 100.0)
        assert hit is not None
        assert hit.t == pytest.approx(10.0)
        assert hit.point[2] == pytest.approx(0.0, abs=1e-9)

    def test_miss_returns_none(self, flat_index):
        assert ray_cast(flat_index, (5, 5, 10), (0, 0, 1), 100.0) is None
        assert ray_cast(flat_index, (20, 20, 10), (0, 0, -1), 100.0) is None

    def test_t_max_limits_hits(self, flat_index):
        assert ray_cast(flat_index, (3, 6, 10), (0, 0, -1), 9.5) is None
        assert ray_cast(flat_index, (3, 6, 10), (0, 0, -1), 10.5) is not None

    def test_origin_on_surface_is_not_a_hit(self, flat_index):
        assert ray_cast(flat_index, (5, 5, 0), (0, 0, -1), 10.0) is None

    def test_non_unit_direction_rejected(self, flat_index):
        with pytest.raises(InvalidGeometry, match="unit"):
            ray_cast(flat_index, (5, 5, 10), (0, 0, -2), 100.0)

    def test_empty_mesh_cannot_be_indexed(self):
        with pytest.raises(EmptyMesh):
            build_spatial_index(TriangleMesh.empty())

    def test_nearest_of_stacked_surfaces(self):
        mesh = TriangleMesh.concatenate([
            scenes.floor((0, 0), (4, 4), z=0.0),
            scenes.floor((0, 0), (4, 4), z=2.0),
        ])
        hit = ray_cast(build_spatial_index(mesh), (1, 1, 5), (0, 0, -1), 100.0)
        assert hit.t == pytest.approx(3.0)
        assert hit.triangle_id >= 2

    def test_indexed_matches_exhaustive(self, sphere_index, rng):
        origins = rng.uniform(-3, 3, size=(400, 3))
        targets = rng.uniform(-0.8, 0.8, size=(400, 3))
        dirs = targets - origins
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t, tri = sphere_index.ray_cast_many(origins, dirs, 10.0)
        for i in range(len(origins)):
            expected = sphere_index.ray_cast_exhaustive(origins[i], dirs[i], 10.0)
            if expected is None:
                assert tri[i] == -1
            else:
                assert tri[i] == expected.triangle_id
                assert t[i] == expected.t

    def test_occlusion_matches_exhaustive(self, sphere_index, rng):
        origins = rng.uniform(-3, 3, size=(400, 3))
        dirs = rng.normal(size=(400, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        limits = rng.uniform(0.5, 4.0, size=400)
        blocked = sphere_index.occluded_many(origins, dirs, limits)
        for i in range(len(origins)):
            hit = sphere_index.ray_cast_exhaustive(origins[i], dirs[i], limits[i])
            assert blocked[i] == (hit is not None and hit.t < limits[i])
        assert blocked.any() and not blocked.all()

    def test_batch_misses_are_inf(self, flat_index):
        t, tri = flat_index.ray_cast_many([[5, 5, 1], [5, 5, 1]], [[0, 0, -1], [0, 0, 1]], 5.0)
        assert t[0] == pytest.approx(1.0)
        assert np.isinf(t[1]) and tri[1] == -1


class TestClosestDistance:
    """Point-to-mesh distances."""

    def test_distance_above_floor(self, flat_index):
        dist, _ = flat_index.closest_distance([[5, 5, 3], [5, 5, -0.5]])
        np.testing.assert_allclose(dist, [3.0, 0.5])

    def test_distance_beyond_edge(self, flat_index):
        dist, _ = flat_index.closest_distance([[13, 5, 4]])
        assert dist[0] == pytest.approx(5.0)

    def test_distance_matches_brute_force(self, sphere_index, rng):
        points = rng.uniform(-2, 2, size=(200, 3))
        dist, _ = sphere_index.closest_distance(points)
        # The polygonal sphere lies inside the unit sphere, within its chord sag.
        radial = np.abs(np.linalg.norm(points, axis=1) - 1.0)
        assert np.all(np.abs(dist - radial) < 0.02)


class TestNeighbors:
    """k-nearest-neighbour search."""

    def test_matches_exhaustive(self, rng):
        cloud = PointCloud(rng.uniform(0, 1, size=(500, 3)))
        locator = PointLocator(cloud)
        for query in rng.uniform(0, 1, size=(20, 3)):
            assert locator.query(query, 5) == nearest_point_exhaustive(cloud, query, 5)

    def test_ties_go_to_lowest_index(self):
        cloud = PointCloud([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [5, 5, 5]])
        result = nearest_point(cloud, (0, 0, 0), 2)
        assert [i for i, _ in result] == [0, 1]

    def test_k_larger_than_cloud(self):
        cloud = PointCloud([[0, 0, 0], [1, 0, 0]])
        assert len(nearest_point(cloud, (0, 0, 0), 10)) == 2

    def test_empty_cloud_rejected(self):
        with pytest.raises(EmptyCloud):
            nearest_point(PointCloud(np.empty((0, 3))), (0, 0, 0), 1)


class TestTopology:
    """Edge and component diagnostics."""

    def test_closed_box_is_watertight(self, unit_box):
        report = mesh_topology_report(unit_box)
        assert report.watertight
        assert report.components == 1
        assert report.total_area == pytest.approx(6.0)

    def test_open_rectangle_has_boundary(self, flat_mesh):
        report = mesh_topology_report(flat_mesh)
        assert report.boundary_edges == 4
        assert not report.watertight

    def test_component_labels_follow_triangle_order(self, unit_box):
        mesh = TriangleMesh.concatenate([unit_box.transformed(offset=(3, 0, 0)), unit_box])
        labels = triangle_components(mesh)
        assert labels[0] == 0
        assert set(labels[len(unit_box):]) == {1}
