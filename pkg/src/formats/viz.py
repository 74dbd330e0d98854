"""Coverage-colored PLY exports for external viewers."""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from src.formats.geometry_io import write_ply
from src.geometry.types import TriangleMesh
from src.planning.candidates import Viewpoint
from src.planning.sampling import SampleSet
from src.planning.sensors import AgentClass
from src.routing.tours import Tour

logger = logging.getLogger(__name__)

GROUND_COVERED, AERIAL_ONLY, UNCOVERED = 0, 1, 2
STATUS_COLORS = np.array([[0, 0, 255], [0, 200, 0], [255, 0, 0]], dtype=np.uint8)
CLASS_COLORS = {AgentClass.GROUND: (0, 0, 255), AgentClass.AERIAL: (255, 165, 0)}


def sample_status(n_samples: int, ground_covered: Optional[np.ndarray], aerial_covered: Optional[np.ndarray]) -> np.ndarray:
    status = np.full(n_samples, UNCOVERED, dtype=np.int64)
    if aerial_covered is not None:
        status[np.asarray(aerial_covered, dtype=bool)] = AERIAL_ONLY
    if ground_covered is not None:
        status[np.asarray(ground_covered, dtype=bool)] = GROUND_COVERED
    return status


def triangle_status(mesh: TriangleMesh, samples: SampleSet, status: np.ndarray) -> np.ndarray:
    """Area-weighted majority status per triangle; -1 where a triangle has no samples.

    Equal weights resolve toward the better-covered status.
    """
    votes = np.bincount(
        samples.triangle_ids * 3 + status, weights=samples.weights, minlength=3 * len(mesh)
    ).reshape(len(mesh), 3)
    has_samples = np.bincount(samples.triangle_ids, minlength=len(mesh)) > 0
    return np.where(has_samples, np.argmax(votes, axis=1), -1)


def _color_columns(positions: np.ndarray, colors: np.ndarray) -> dict:
    return {
        "x": positions[:, 0], "y": positions[:, 1], "z": positions[:, 2],
        "red": colors[:, 0], "green": colors[:, 1], "blue": colors[:, 2],
    }


def export_coverage_viz(
    mesh: TriangleMesh,
    samples: SampleSet,
    ground_covered: Optional[np.ndarray],
    aerial_covered: Optional[np.ndarray],
    path: Union[str, Path],
    viewpoints: Sequence[Viewpoint] = (),
    tours: Sequence[Tour] = (),
) -> List[Path]:
    """Write the colored mesh and, when given, viewpoint and tour companions.

    Ground-covered surface is blue, aerial-only green and uncovered red.
    Vertices are not shared between triangles so each face keeps its color.
    Companions are written next to ``path`` as ``<stem>_viewpoints.ply`` and
    ``<stem>_tours.ply``.
    """
    path = Path(path)
    status = sample_status(len(samples), ground_covered, aerial_covered)
    per_tri = triangle_status(mesh, samples, status)
    shown = np.flatnonzero(per_tri >= 0)

    corners = mesh.vertices[mesh.triangles[shown]].reshape(-1, 3)
    colors = np.repeat(STATUS_COLORS[per_tri[shown]], 3, axis=0)
    faces = np.arange(len(corners), dtype=np.int64).reshape(-1, 3)
    written = [write_ply(path, _color_columns(corners, colors), faces=faces)]

    counts = np.bincount(per_tri[shown], minlength=3)
    logger.info(
        f"Coverage viz {path}: {counts[GROUND_COVERED]} blue, "
        f"{counts[AERIAL_ONLY]} green, {counts[UNCOVERED]} red triangles"
    )

    if viewpoints:
        written.append(export_viewpoints(viewpoints, path.with_name(f"{path.stem}_viewpoints.ply")))
    if tours:
        written.append(export_tours(tours, viewpoints, path.with_name(f"{path.stem}_tours.ply")))
    return written


def export_viewpoints(viewpoints: Sequence[Viewpoint], path: Union[str, Path]) -> Path:
    positions = np.array([vp.position for vp in viewpoints], dtype=np.float64).reshape(-1, 3)
    colors = np.array([CLASS_COLORS[vp.agent_class] for vp in viewpoints], dtype=np.uint8).reshape(-1, 3)
    return write_ply(path, _color_columns(positions, colors))


def export_tours(tours: Sequence[Tour], viewpoints: Sequence[Viewpoint], path: Union[str, Path]) -> Path:
    """Tours as polylines: one vertex per stop and an edge per leg."""
    by_id = {vp.id: vp for vp in viewpoints}
    positions, colors, edges = [], [], []
    for tour in tours:
        base = len(positions)
        for vp_id in tour.order:
            positions.append(by_id[vp_id].position)
            colors.append(CLASS_COLORS[tour.agent_class])
        edges.extend((base + k, base + k + 1) for k in range(len(tour.order) - 1))
    return write_ply(
        path,
        _color_columns(
            np.array(positions, dtype=np.float64).reshape(-1, 3),
            np.array(colors, dtype=np.uint8).reshape(-1, 3),
        ),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
    )
