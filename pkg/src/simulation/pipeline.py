"""Planning and the coarse-to-fine survey loop.

Run directory layout::

    config.yaml
    summary.csv
    iter_<k>/coarse.ply         coarse survey cloud (iteration 0 only)
    iter_<k>/coarse_mesh.ply    mesh the plan was made on
    iter_<k>/plan.json
    iter_<k>/scans/vp_<id>.ply  simulated fine scans
    iter_<k>/report.json        ground-truth evaluation
    iter_<k>/viz.ply            plus viz_viewpoints.ply and viz_tours.ply
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from src.formats.files import atomic_write_text
from src.formats.geometry_io import write_cloud_ply, write_mesh_ply
from src.formats.plan_io import ScanPlan, build_plan, save_plan
from src.formats.viz import export_coverage_viz
from src.geometry.spatial_index import SpatialIndex, build_spatial_index
from src.geometry.types import PointCloud, TriangleMesh
from src.meshify.reconstruct import reconstruct
from src.planning.candidates import Viewpoint, generate_aerial_candidates, generate_ground_candidates
from src.planning.sampling import SampleSet, sample_surface
from src.planning.sensors import AgentClass
from src.planning.visibility import CoverageMatrix, build_coverage, sensors_by_class
from src.routing.tours import Tour, plan_tours
from src.simulation.errors import PipelineStageError
from src.simulation.evaluation import CoverageReport, evaluate_plan
from src.simulation.scanner import ScanConfig, simulate_coarse_survey, simulate_scan
from src.solver.set_cover import covered_weight
from src.solver.two_phase import TwoPhaseSelection, two_phase_plan
from src.solver.weights import WeightMode, compute_weights
from src.utils.config import ConfigLoader, RunConfig

logger = logging.getLogger(__name__)


@dataclass
class PlanningOutcome:
    plan: ScanPlan
    mesh: TriangleMesh
    samples: SampleSet
    weights: np.ndarray
    viewpoints: List[Viewpoint]
    selection: TwoPhaseSelection
    tours: List[Tour]
    ground_matrix: Optional[CoverageMatrix]
    aerial_matrix: Optional[CoverageMatrix]


def plan_scans(
    mesh: TriangleMesh,
    config: RunConfig,
    prior_cloud: Optional[PointCloud] = None,
    workers: int = 1,
    index: Optional[SpatialIndex] = None,
) -> PlanningOutcome:
    """Candidates, coverage, two-phase selection and tours for one model.

    Density-deficit weights are used when configured and a prior cloud is
    available; otherwise samples are weighted by area alone.
    """
    c = config.candidates
    index = index or build_spatial_index(mesh)
    samples = sample_surface(mesh, c.sample_spacing)
    ground = generate_ground_candidates(
        mesh, index, c.ground_spacing, c.mount_height, c.clearance_radius,
        max_ground_rise=c.max_ground_rise, slope_deg=c.ground_slope_deg,
    )
    aerial = generate_aerial_candidates(
        mesh, index, c.aerial_spacing, c.standoff, c.alt_band,
        slope_deg=c.ground_slope_deg, start_id=len(ground),
    )
    sensors = sensors_by_class(config.ground_sensor, config.aerial_sensor)
    ground_matrix = build_coverage(ground, samples, sensors, index, workers) if ground else None
    aerial_matrix = build_coverage(aerial, samples, sensors, index, workers) if aerial else None

    mode = WeightMode(config.solver.weight_mode)
    if prior_cloud is None:
        mode = WeightMode.UNIFORM
    weights = compute_weights(samples, prior_cloud, mode, config.solver.rho_ref, config.solver.density_radius)

    selection = two_phase_plan(ground_matrix, aerial_matrix, weights, config.solver)
    viewpoints = ground + aerial
    tours = plan_tours(
        {AgentClass.GROUND: selection.ground.ids, AgentClass.AERIAL: selection.aerial.ids},
        viewpoints,
        scene_bounds=mesh.bounds(),
    )
    plan = build_plan(selection, viewpoints, tours, config.config_hash(), config.seed)
    return PlanningOutcome(plan, mesh, samples, weights, viewpoints, selection, tours, ground_matrix, aerial_matrix)


def scan_plan(
    index: SpatialIndex, plan: ScanPlan, config: RunConfig, workers: int = 1
) -> Dict[int, PointCloud]:
    """Simulate the fine scan at every planned viewpoint, keyed by viewpoint id."""
    settings = {
        AgentClass.GROUND: ScanConfig(config.ground_sensor, config.ground_sensor.angular_resolution, config.seed),
        AgentClass.AERIAL: ScanConfig(config.aerial_sensor, config.aerial_sensor.angular_resolution, config.seed),
    }
    viewpoints = plan.viewpoints()

    def one(vp: Viewpoint) -> PointCloud:
        return simulate_scan(index, vp, settings[vp.agent_class])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            clouds = list(executor.map(one, viewpoints))
    else:
        clouds = [one(vp) for vp in viewpoints]
    return {vp.id: cloud for vp, cloud in zip(viewpoints, clouds)}


def coarse_waypoints(truth: TriangleMesh, index: SpatialIndex, config: RunConfig) -> List[tuple]:
    """Walk-through stops: every n-th ground station on the real site."""
    c = config.candidates
    stations = generate_ground_candidates(
        truth, index, c.ground_spacing, c.mount_height, c.clearance_radius,
        max_ground_rise=c.max_ground_rise, slope_deg=c.ground_slope_deg,
    )
    return [vp.position for vp in stations[:: config.simulation.coarse_decimation]]


def coarse_scan_config(config: RunConfig) -> ScanConfig:
    sim = config.simulation
    sensor = replace(config.ground_sensor, range_noise_sigma=sim.coarse_range_sigma)
    return ScanConfig(sensor, sim.coarse_resolution, config.seed, sim.pose_jitter_sigma)


@dataclass
class IterationResult:
    iteration: int
    plan: ScanPlan
    report: CoverageReport
    cumulative_fraction: float
    directory: Path

    def summary_row(self) -> dict:
        return {
            "iteration": self.iteration,
            "planned_fraction": self.plan.planned_fraction,
            "achieved_fraction": self.report.achieved_fraction,
            "cumulative_fraction": self.cumulative_fraction,
            "ground_viewpoints": len(self.plan.selections["ground"]),
            "aerial_viewpoints": len(self.plan.selections["aerial"]),
            "ground_tour_length": self.plan.tours["ground"].length if "ground" in self.plan.tours else 0.0,
            "aerial_tour_length": self.plan.tours["aerial"].length if "aerial" in self.plan.tours else 0.0,
        }


@dataclass
class PipelineResult:
    run_dir: Path
    iterations: List[IterationResult] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def final_fraction(self) -> float:
        return self.iterations[-1].cumulative_fraction if self.iterations else 0.0

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame([it.summary_row() for it in self.iterations])


@contextmanager
def _stage(iteration: int, name: str):
    start = time.perf_counter()
    logger.info(f"[iter {iteration}] {name} ...")
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as e:
        raise PipelineStageError(iteration, name, e) from e
    logger.info(f"[iter {iteration}] {name} done in {time.perf_counter() - start:.1f}s")


def run_pipeline(
    truth: TriangleMesh,
    config: RunConfig,
    out_dir: Union[str, Path],
    seed: Optional[int] = None,
    prior_mesh: Optional[TriangleMesh] = None,
    workers: Optional[int] = None,
) -> PipelineResult:
    """Survey, model, plan, scan and evaluate until coverage stops improving.

    Iteration 0 plans on a mesh rebuilt from a noisy coarse survey, or directly
    on ``prior_mesh`` when one is given. Later iterations rebuild the model
    from all fine scans so far and weight samples by scan-density deficit.
    Coverage on the ground truth accumulates across iterations.
    """
    if seed is not None:
        config = config.with_overrides(**{"pipeline.seed": seed})
    workers = workers or config.pipeline.workers
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(run_dir / "config.yaml", ConfigLoader.dump(config))

    truth_index = build_spatial_index(truth)
    truth_samples = sample_surface(truth, config.candidates.sample_spacing)
    sensors = sensors_by_class(config.ground_sensor, config.aerial_sensor)
    total = truth_samples.total_weight
    target = config.solver.target_coverage

    result = PipelineResult(run_dir)
    cumulative = np.zeros(len(truth_samples), dtype=bool)
    fine_clouds: List[PointCloud] = []
    previous = 0.0

    for k in range(config.pipeline.max_iterations):
        iter_dir = run_dir / f"iter_{k}"
        prior_cloud = None
        if k == 0 and prior_mesh is not None:
            logger.info("Planning directly on the supplied model (no coarse survey)")
            model = prior_mesh
        elif k == 0:
            with _stage(k, "coarse_survey"):
                waypoints = coarse_waypoints(truth, truth_index, config)
                coarse = simulate_coarse_survey(truth_index, waypoints, coarse_scan_config(config), workers)
                write_cloud_ply(iter_dir / "coarse.ply", coarse)
            with _stage(k, "meshify"):
                model = reconstruct(coarse, config.meshify)
        else:
            prior_cloud = PointCloud.concatenate(fine_clouds)
            with _stage(k, "meshify"):
                model = reconstruct(prior_cloud, config.meshify)
        write_mesh_ply(iter_dir / "coarse_mesh.ply", model)

        with _stage(k, "plan"):
            outcome = plan_scans(model, config, prior_cloud, workers)
            save_plan(outcome.plan, iter_dir / "plan.json")

        with _stage(k, "scan"):
            scans = scan_plan(truth_index, outcome.plan, config, workers)
            for vp_id, cloud in scans.items():
                write_cloud_ply(iter_dir / "scans" / f"vp_{vp_id}.ply", cloud)
            fine_clouds.extend(scans.values())

        with _stage(k, "evaluate"):
            report = evaluate_plan(truth_samples, outcome.plan, truth_index, sensors, clouds=fine_clouds, workers=workers)
            cumulative |= report.covered
            fraction = covered_weight(cumulative, truth_samples.weights) / total
            payload = report.to_dict()
            payload["cumulative_fraction"] = float(f"{fraction:.9g}")
            payload["planned_fraction"] = outcome.plan.planned_fraction
            atomic_write_text(iter_dir / "report.json", json.dumps(payload, indent=2) + "\n")
            export_coverage_viz(
                truth, truth_samples, report.ground_covered, report.aerial_covered,
                iter_dir / "viz.ply", outcome.plan.viewpoints(), list(outcome.plan.tours.values()),
            )

        result.iterations.append(IterationResult(k, outcome.plan, report, fraction, iter_dir))
        logger.info(f"Iteration {k}: planned {outcome.plan.planned_fraction:.4f}, cumulative true coverage {fraction:.4f}")

        if fraction >= target:
            result.stop_reason = "target reached"
            break
        if k > 0 and fraction - previous < config.pipeline.epsilon_stop:
            result.stop_reason = "coverage gain below epsilon"
            break
        previous = fraction
    else:
        result.stop_reason = "max iterations"

    summary = result.summary().to_csv(index=False, float_format="%.9g")
    atomic_write_text(run_dir / "summary.csv", summary)
    logger.info(f"Pipeline finished after {len(result.iterations)} iteration(s): {result.stop_reason}")
    return result
