"""Tests for coverage-colored exports."""

import numpy as np
import pytest

from src.formats.geometry_io import read_ply
from src.formats.viz import (
    AERIAL_ONLY,
    GROUND_COVERED,
    UNCOVERED,
    export_coverage_viz,
    sample_status,
    triangle_status,
)
from src.planning.candidates import Viewpoint
from src.planning.sampling import sample_surface
from src.planning.sensors import AgentClass
from src.routing.tours import Tour


class TestStatus:
    def test_ground_wins_over_aerial(self):
        ground = np.array([True, False, False, True])
        aerial = np.array([True, True, False, False])
        np.testing.assert_array_equal(
            sample_status(4, ground, aerial), [GROUND_COVERED, AERIAL_ONLY, UNCOVERED, GROUND_COVERED]
        )

    def test_missing_masks_mean_uncovered(self):
        assert (sample_status(3, None, None) == UNCOVERED).all()

    def test_weighted_majority_per_triangle(self, flat_mesh):
        samples = sample_surface(flat_mesh, 1.0)
        status = np.full(len(samples), UNCOVERED)
        first = samples.triangle_ids == 0
        status[first] = GROUND_COVERED
        status[np.flatnonzero(first)[:5]] = AERIAL_ONLY
        np.testing.assert_array_equal(triangle_status(flat_mesh, samples, status), [GROUND_COVERED, UNCOVERED])


class TestExport:
    def test_colored_mesh_and_companions(self, tmp_path, flat_mesh):
        samples = sample_surface(flat_mesh, 1.0)
        ground = samples.triangle_ids == 0
        viewpoints = [Viewpoint(0, (2.0, 5.0, 1.5), AgentClass.GROUND), Viewpoint(1, (8.0, 5.0, 1.5), AgentClass.GROUND)]
        tours = [Tour(AgentClass.GROUND, [0, 1], 6.0)]
        written = export_coverage_viz(
            flat_mesh, samples, ground, np.zeros(len(samples), dtype=bool), tmp_path / "viz.ply", viewpoints, tours
        )
        assert [p.name for p in written] == ["viz.ply", "viz_viewpoints.ply", "viz_tours.ply"]

        mesh = read_ply(written[0])
        assert len(mesh) == 2
        assert len(mesh.vertices) == 6
        assert mesh.total_area == pytest.approx(100.0)

        header = written[0].read_bytes().split(b"end_header")[0].decode()
        assert "property uchar red" in header
        tour_header = written[2].read_bytes().split(b"end_header")[0].decode()
        assert "element edge 1" in tour_header

    def test_mesh_only_without_viewpoints(self, tmp_path, flat_mesh):
        samples = sample_surface(flat_mesh, 1.0)
        written = export_coverage_viz(flat_mesh, samples, None, None, tmp_path / "plain.ply")
        assert [p.name for p in written] == ["plain.ply"]
