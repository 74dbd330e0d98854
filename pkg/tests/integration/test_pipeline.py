"""Coarse-to-fine survey loop: artifacts, stopping and repeatability."""

from pathlib import Path

import pandas as pd
import pytest

from src.formats.geometry_io import read_ply
from src.formats.plan_io import load_plan
from src.simulation.pipeline import run_pipeline
from src.utils.config import ConfigLoader, RunConfig
from src.utils.scenes import box_building, courtyard, room_shell

FAST = {
    "meshify.voxel_size": 0.2,
    "candidates.sample_spacing": 0.5,
    "candidates.aerial_spacing": 2.5,
    "candidates.standoff": 1.5,
    "sensors.ground.angular_resolution": 2.0,
    "sensors.aerial.angular_resolution": 2.0,
    "pipeline.max_iterations": 2,
}


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def fast_config():
    return RunConfig().with_overrides(**FAST)


@pytest.fixture(scope="module")
def box_runs(tmp_path_factory, fast_config):
    """The same box-building survey run serially, in parallel and with another seed."""
    truth = box_building()
    root = tmp_path_factory.mktemp("runs")
    serial = run_pipeline(truth, fast_config, root / "serial", seed=3, workers=1)
    parallel = run_pipeline(truth, fast_config, root / "parallel", seed=3, workers=2)
    reseeded = run_pipeline(truth, fast_config, root / "reseeded", seed=4, workers=1)
    return serial, parallel, reseeded


class TestRunDirectory:
    def test_layout(self, box_runs):
        serial, _, _ = box_runs
        run = serial.run_dir
        assert (run / "config.yaml").exists()
        assert (run / "summary.csv").exists()
        first = run / "iter_0"
        for name in ("coarse.ply", "coarse_mesh.ply", "plan.json", "report.json", "viz.ply"):
            assert (first / name).exists(), name

        plan = load_plan(first / "plan.json")
        scans = sorted(p.name for p in (first / "scans").iterdir())
        assert scans == sorted(f"vp_{vp.id}.ply" for vp in plan.viewpoints())

    def test_saved_config_reloads(self, box_runs, fast_config):
        serial, _, _ = box_runs
        saved = ConfigLoader(serial.run_dir / "config.yaml").load()
        assert saved == fast_config.with_overrides(**{"pipeline.seed": 3})
        assert load_plan(serial.run_dir / "iter_0" / "plan.json").config_hash == saved.config_hash()

    def test_summary_matches_iterations(self, box_runs):
        serial, _, _ = box_runs
        summary = pd.read_csv(serial.run_dir / "summary.csv")
        assert list(summary["iteration"]) == [it.iteration for it in serial.iterations]
        assert summary["cumulative_fraction"].is_monotonic_increasing
        assert serial.stop_reason in ("target reached", "coverage gain below epsilon", "max iterations")

    def test_later_iterations_start_from_fine_scans(self, box_runs):
        serial, _, _ = box_runs
        if len(serial.iterations) < 2:
            pytest.skip("first iteration already reached the target")
        assert not (serial.run_dir / "iter_1" / "coarse.ply").exists()
        assert len(read_ply(serial.run_dir / "iter_1" / "coarse_mesh.ply")) > 0


class TestRepeatability:
    def test_same_seed_same_bytes(self, box_runs):
        serial, parallel, _ = box_runs
        a, b = tree_bytes(serial.run_dir), tree_bytes(parallel.run_dir)
        assert a.keys() == b.keys()
        assert [name for name in a if a[name] != b[name]] == []

    def test_seed_changes_the_survey(self, box_runs):
        serial, _, reseeded = box_runs
        coarse = Path("iter_0") / "coarse.ply"
        assert (serial.run_dir / coarse).read_bytes() != (reseeded.run_dir / coarse).read_bytes()


class TestModelBypass:
    def test_convex_room_done_in_one_iteration(self, tmp_path):
        room = room_shell((10.0, 8.0, 3.0))
        config = RunConfig().with_overrides(**{
            "candidates.sample_spacing": 0.5,
            "sensors.ground.min_range": 0.1,
            "sensors.ground.max_incidence": 90.0,
            "sensors.ground.min_elevation": -90.0,
            "sensors.ground.angular_resolution": 2.0,
            "solver.target_coverage": 1.0,
        })
        result = run_pipeline(room, config, tmp_path / "room", prior_mesh=room)

        assert len(result.iterations) == 1
        assert result.stop_reason == "target reached"
        assert result.final_fraction == 1.0
        assert len(result.iterations[0].plan.selections["ground"]) == 1
        assert not (tmp_path / "room" / "iter_0" / "coarse.ply").exists()


@pytest.mark.slow
class TestCourtyard:
    def test_plan_on_coarse_model_holds_on_ground_truth(self, tmp_path):
        config = RunConfig().with_overrides(**{
            "candidates.sample_spacing": 0.5,
            "sensors.ground.angular_resolution": 1.0,
            "sensors.aerial.angular_resolution": 1.0,
            "pipeline.max_iterations": 2,
            "pipeline.epsilon_stop": 0.0,
        })
        result = run_pipeline(courtyard(), config, tmp_path / "courtyard", seed=11, workers=2)

        first = result.iterations[0]
        assert first.report.achieved_fraction >= 0.93
        fractions = [it.cumulative_fraction for it in result.iterations]
        assert fractions == sorted(fractions)
