#!/usr/bin/env python3
"""
scanplan CLI - Main entry point

Usage:
    scanplan --help
    scanplan make-scene courtyard -o courtyard.ply
    scanplan meshify coarse.ply -o coarse_mesh.ply
    scanplan plan coarse_mesh.ply -o plan.json
    scanplan pipeline courtyard.ply -o runs/courtyard --seed 7
    scanplan eval courtyard.ply plan.json

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 infeasible plan.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.table import Table

# Add the project root to Python path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src import __version__
from src.formats.files import atomic_write_text
from src.formats.geometry_io import load_cloud, load_mesh, save_geometry, write_cloud_ply
from src.formats.plan_io import ScanPlan, load_plan, save_plan
from src.formats.viz import export_coverage_viz
from src.geometry.spatial_index import build_spatial_index
from src.geometry.topology import mesh_topology_report
from src.geometry.types import ScanPlanError
from src.meshify.reconstruct import reconstruct
from src.planning.sampling import sample_surface
from src.planning.visibility import sensors_by_class
from src.simulation.errors import PipelineStageError
from src.simulation.evaluation import evaluate_plan
from src.simulation.pipeline import plan_scans, run_pipeline, scan_plan
from src.solver.errors import Infeasible, NoProgress
from src.utils.config import ConfigError, ConfigLoader, RunConfig
from src.utils.scenes import SCENES, make_scene

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


def exit_code_for(error: BaseException) -> Optional[int]:
    """Exit status for a known failure; None for anything unexpected."""
    if isinstance(error, PipelineStageError):
        return exit_code_for(error.cause)
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, (NoProgress, Infeasible)):
        return EXIT_INFEASIBLE
    if isinstance(error, (ScanPlanError, OSError)):
        return EXIT_DATA
    return None


def fail(action: str, error: Exception) -> None:
    code = exit_code_for(error)
    if code is None:
        raise error
    click.echo(f"❌ {action} failed: {error}", err=True)
    sys.exit(code)


class ScanPlanGroup(click.Group):
    """Click group that reports usage errors with exit status 1."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def common_options(func):
    func = click.option("--seed", type=int, default=None, help="Override pipeline.seed")(func)
    func = click.option(
        "--config", "config_path", type=click.Path(dir_okay=False), default=None,
        help="YAML file with dotted setting keys",
    )(func)
    return func


def workers_option(func):
    return click.option("--workers", type=int, default=None, help="Worker threads (default: pipeline.workers)")(func)


def load_config(config_path: Optional[str], seed: Optional[int]) -> RunConfig:
    config = ConfigLoader(config_path).load()
    if seed is not None:
        config = config.with_overrides(**{"pipeline.seed": seed})
    return config


def plan_table(plan: ScanPlan, title: str) -> Table:
    table = Table(title=title)
    table.add_column("class")
    table.add_column("viewpoints", justify="right")
    table.add_column("tour length (m)", justify="right")
    table.add_column("coverage", justify="right")
    for key, fraction in (("ground", plan.ground_fraction), ("aerial", plan.aerial_fraction)):
        length = plan.tours[key].length if key in plan.tours else 0.0
        table.add_row(key, str(len(plan.selections[key])), f"{length:.1f}", f"{fraction:.2%}")
    table.add_row("combined", str(len(plan.viewpoints())), "", f"{plan.planned_fraction:.2%}")
    return table


@click.group(cls=ScanPlanGroup)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def cli(verbose: bool):
    """scanplan - plan terrestrial and aerial scan positions for a site.

    Builds a coarse model, picks a small set of ground and drone viewpoints
    that cover it, orders them into tours, and checks the plan by
    simulating the scans against ground truth.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )


@cli.command()
@click.argument("cloud", type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Mesh PLY to write")
@click.option("--ascii", "ascii_ply", is_flag=True, help="Write ascii instead of binary PLY")
@common_options
def meshify(cloud: str, output: str, ascii_ply: bool, config_path: Optional[str], seed: Optional[int]):
    """Reconstruct a mesh from a point cloud."""
    try:
        config = load_config(config_path, seed)
        points = load_cloud(cloud)
        click.echo(f"🔺 Meshing {len(points):,} points (voxel {config.meshify.voxel_size} m)")
        mesh = reconstruct(points, config.meshify)
        save_geometry(output, mesh, binary=not ascii_ply)
        report = mesh_topology_report(mesh)
        click.echo(
            f"✅ Wrote {len(mesh):,} triangles, {report.total_area:.2f} m², "
            f"{report.components} component(s), watertight: {'yes' if report.watertight else 'no'}"
        )
    except Exception as e:
        fail("Meshing", e)


@cli.command()
@click.argument("mesh", type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Plan JSON to write")
@click.option("--prior-cloud", type=click.Path(dir_okay=False), help="Existing scan for density weights")
@click.option("--viz", type=click.Path(dir_okay=False), help="Also write a coverage PLY")
@common_options
@workers_option
def plan(mesh: str, output: str, prior_cloud: Optional[str], viz: Optional[str],
         config_path: Optional[str], seed: Optional[int], workers: Optional[int]):
    """Choose viewpoints and tours that cover MESH."""
    try:
        config = load_config(config_path, seed)
        model = load_mesh(mesh)
        prior = load_cloud(prior_cloud) if prior_cloud else None
        outcome = plan_scans(model, config, prior, workers or config.pipeline.workers)
        save_plan(outcome.plan, output)
        console.print(plan_table(outcome.plan, f"Plan for {Path(mesh).name}"))
        if outcome.plan.warning:
            click.echo(f"⚠️  {outcome.plan.warning}")
        if viz:
            export_coverage_viz(
                model, outcome.samples, outcome.selection.ground.covered,
                outcome.selection.aerial.covered & ~outcome.selection.ground.covered,
                viz, outcome.plan.viewpoints(), outcome.tours,
            )
        click.echo(f"✅ Plan written to {output}")
    except Exception as e:
        fail("Planning", e)


@cli.command()
@click.argument("truth", type=click.Path(dir_okay=False))
@click.argument("plan_path", metavar="PLAN", type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(file_okay=False), help="Directory for scans and report")
@common_options
@workers_option
def simulate(truth: str, plan_path: str, output: str, config_path: Optional[str], seed: Optional[int],
             workers: Optional[int]):
    """Re-run the scans of a saved plan against a ground-truth mesh."""
    try:
        config = load_config(config_path, seed)
        saved = load_plan(plan_path)
        if seed is None:
            config = config.with_overrides(**{"pipeline.seed": saved.seed})
        mesh = load_mesh(truth)
        index = build_spatial_index(mesh)
        workers = workers or config.pipeline.workers
        out = Path(output)

        scans = scan_plan(index, saved, config, workers)
        for vp_id, cloud in scans.items():
            write_cloud_ply(out / "scans" / f"vp_{vp_id}.ply", cloud)
        samples = sample_surface(mesh, config.candidates.sample_spacing)
        sensors = sensors_by_class(config.ground_sensor, config.aerial_sensor)
        report = evaluate_plan(samples, saved, index, sensors, clouds=list(scans.values()), workers=workers)
        atomic_write_text(out / "report.json", json.dumps(report.to_dict(), indent=2) + "\n")
        click.echo(f"✅ {len(scans)} scans, true coverage {report.achieved_fraction:.2%} (planned {saved.planned_fraction:.2%})")
    except Exception as e:
        fail("Simulation", e)


@cli.command()
@click.argument("truth", type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(file_okay=False), help="Run directory")
@click.option("--prior-mesh", type=click.Path(dir_okay=False), help="Plan on this model, skipping the coarse survey")
@common_options
@workers_option
def pipeline(truth: str, output: str, prior_mesh: Optional[str], config_path: Optional[str],
             seed: Optional[int], workers: Optional[int]):
    """Run the coarse-to-fine survey loop on a ground-truth mesh."""
    try:
        config = load_config(config_path, seed)
        truth_mesh = load_mesh(truth)
        prior = load_mesh(prior_mesh) if prior_mesh else None
        click.echo(f"🛰️  Pipeline on {Path(truth).name} (seed {config.seed}) -> {output}")
        result = run_pipeline(truth_mesh, config, output, prior_mesh=prior, workers=workers)

        table = Table(title=f"Pipeline: {result.stop_reason}")
        for column in ("iteration", "ground", "aerial", "planned", "achieved", "cumulative"):
            table.add_column(column, justify="right")
        for it in result.iterations:
            row = it.summary_row()
            table.add_row(
                str(row["iteration"]), str(row["ground_viewpoints"]), str(row["aerial_viewpoints"]),
                f"{row['planned_fraction']:.2%}", f"{row['achieved_fraction']:.2%}", f"{row['cumulative_fraction']:.2%}",
            )
        console.print(table)
        click.echo(f"✅ Final coverage {result.final_fraction:.2%}")
    except Exception as e:
        fail("Pipeline", e)


@cli.command("eval")
@click.argument("truth", type=click.Path(dir_okay=False))
@click.argument("plan_path", metavar="PLAN", type=click.Path(dir_okay=False))
@click.option("--verify-hash", is_flag=True, help="Fail if the plan was made with a different configuration")
@common_options
@workers_option
def evaluate(truth: str, plan_path: str, verify_hash: bool, config_path: Optional[str],
             seed: Optional[int], workers: Optional[int]):
    """Coverage a saved plan achieves on a ground-truth mesh."""
    try:
        config = load_config(config_path, seed)
        saved = load_plan(plan_path, config.config_hash() if verify_hash else None)
        mesh = load_mesh(truth)
        index = build_spatial_index(mesh)
        samples = sample_surface(mesh, config.candidates.sample_spacing)
        sensors = sensors_by_class(config.ground_sensor, config.aerial_sensor)
        report = evaluate_plan(samples, saved, index, sensors, workers=workers or config.pipeline.workers)
        click.echo(f"📊 Planned {saved.planned_fraction:.2%}, achieved {report.achieved_fraction:.2%}")
        click.echo(f"   {len(report.residual_ids)} of {len(samples)} samples unseen")
    except Exception as e:
        fail("Evaluation", e)


@cli.command("export-viz")
@click.argument("mesh", type=click.Path(dir_okay=False))
@click.argument("plan_path", metavar="PLAN", type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Colored PLY to write")
@common_options
def export_viz(mesh: str, plan_path: str, output: str, config_path: Optional[str], seed: Optional[int]):
    """Color MESH by how a saved plan covers it."""
    try:
        config = load_config(config_path, seed)
        saved = load_plan(plan_path)
        model = load_mesh(mesh)
        index = build_spatial_index(model)
        samples = sample_surface(model, config.candidates.sample_spacing)
        sensors = sensors_by_class(config.ground_sensor, config.aerial_sensor)
        report = evaluate_plan(samples, saved, index, sensors, workers=config.pipeline.workers)
        written = export_coverage_viz(
            model, samples, report.ground_covered, report.aerial_covered, output,
            saved.viewpoints(), list(saved.tours.values()),
        )
        for path in written:
            click.echo(f"✅ Wrote {path}")
    except Exception as e:
        fail("Export", e)


@cli.command("make-scene")
@click.argument("name", type=click.Choice(sorted(SCENES)))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Mesh PLY to write")
@click.option("--ascii", "ascii_ply", is_flag=True, help="Write ascii instead of binary PLY")
def make_scene_command(name: str, output: str, ascii_ply: bool):
    """Write one of the built-in test scenes."""
    try:
        mesh = make_scene(name)
        save_geometry(output, mesh, binary=not ascii_ply)
        click.echo(f"✅ {name}: {len(mesh):,} triangles -> {output}")
    except Exception as e:
        fail("Scene export", e)


if __name__ == "__main__":
    cli()
