"""Candidate scanner positions for ground robots and drones."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.geometry.spatial_index import SpatialIndex
from src.geometry.types import InvalidGeometry, Point3, TriangleMesh
from src.planning.errors import NoGroundFound
from src.planning.sensors import AgentClass

logger = logging.getLogger(__name__)

AXES = np.eye(3)
DOWN = np.array([0.0, 0.0, -1.0])
MAX_LAYERS = 64


@dataclass(frozen=True)
class Viewpoint:
    id: int
    position: Point3
    agent_class: AgentClass
    heading: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "position": list(self.position),
            "class": self.agent_class.value,
            "heading": self.heading,
        }


def _axis_range(lo: float, hi: float, spacing: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(count)


def _as_viewpoints(positions: np.ndarray, agent_class: AgentClass, start_id: int) -> List[Viewpoint]:
    return [
        Viewpoint(id=start_id + i, position=(float(p[0]), float(p[1]), float(p[2])), agent_class=agent_class)
        for i, p in enumerate(positions)
    ]


def up_facing(mesh: TriangleMesh, slope_deg: float = 30.0) -> np.ndarray:
    """Mask of triangles that count as walkable ground."""
    return mesh.face_normals[:, 2] > math.cos(math.radians(slope_deg))


def first_ground_below(
    index: SpatialIndex, points: np.ndarray, ground: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Height of the first up-facing surface straight below each point.

    Down-facing and steep faces are passed through. Returns (z, found).
    """
    n = len(points)
    z = np.full(n, np.nan)
    found = np.zeros(n, dtype=bool)
    origins = np.array(points, dtype=np.float64)
    active = np.arange(n)
    dirs = np.broadcast_to(DOWN, (n, 3))
    for _ in range(MAX_LAYERS):
        if active.size == 0:
            break
        t, tri = index.ray_cast_many(origins[active], dirs[active], np.inf)
        hit = tri >= 0
        active, t, tri = active[hit], t[hit], tri[hit]
        origins[active, 2] -= t
        is_ground = ground[tri]
        z[active[is_ground]] = origins[active[is_ground], 2]
        found[active[is_ground]] = True
        active = active[~is_ground]
    return z, found


def _clearance_blocked(index: SpatialIndex, points: np.ndarray, radius: float) -> np.ndarray:
    """True where any of the six axis rays of length ``radius`` hits geometry.

    Opposite rays are traced as one segment from ``p - radius * axis`` to
    ``p + radius * axis``, so a surface passing through ``p`` itself counts.
    """
    if radius <= 0 or len(points) == 0:
        return np.zeros(len(points), dtype=bool)
    origins = np.repeat(points, len(AXES), axis=0) - radius * np.tile(AXES, (len(points), 1))
    dirs = np.tile(AXES, (len(points), 1))
    t, _ = index.ray_cast_many(origins, dirs, 2 * radius)
    return np.any((t < 2 * radius).reshape(len(points), len(AXES)), axis=1)


def _too_close(index: SpatialIndex, points: np.ndarray, radius: float) -> np.ndarray:
    """Axis clearance rays plus the exact nearest-surface distance."""
    if radius <= 0 or len(points) == 0:
        return np.zeros(len(points), dtype=bool)
    dist, _ = index.closest_distance(points)
    return (dist < radius) | _clearance_blocked(index, points, radius)


def generate_ground_candidates(
    mesh: TriangleMesh,
    index: SpatialIndex,
    grid_spacing: float,
    mount_height: float,
    clearance_radius: float,
    max_ground_rise: float = 1.0,
    slope_deg: float = 30.0,
    start_id: int = 0,
) -> List[Viewpoint]:
    """Scanner stations on a horizontal grid, standing on the lowest walkable level.

    Each grid node is dropped onto the first up-facing surface below it.
    Landings more than ``max_ground_rise`` above the lowest ground level (roofs,
    table tops) are skipped, as are stations whose clearance rays touch
    geometry. Ids follow row-major grid order (y outer, x inner).
    """
    if grid_spacing <= 0 or mount_height <= 0:
        raise InvalidGeometry("grid_spacing and mount_height must be positive")
    ground = up_facing(mesh, slope_deg)
    if not np.any(ground):
        raise NoGroundFound("mesh has no up-facing triangles")

    lo, hi = mesh.bounds()
    ground_level = float(mesh.vertices[mesh.triangles[ground]][..., 2].min())
    xs = _axis_range(lo[0], hi[0], grid_spacing)
    ys = _axis_range(lo[1], hi[1], grid_spacing)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack((gx.ravel(), gy.ravel(), np.full(gx.size, hi[2] + 1.0)))

    z, found = first_ground_below(index, nodes, ground)
    found &= z <= ground_level + max_ground_rise
    stations = nodes[found]
    stations[:, 2] = z[found] + mount_height
    blocked = _clearance_blocked(index, stations, clearance_radius)
    stations = stations[~blocked]

    logger.info(
        f"Ground candidates: {len(stations)} of {len(nodes)} grid nodes "
        f"({int((~found).sum())} off-ground, {int(blocked.sum())} blocked)"
    )
    return _as_viewpoints(stations, AgentClass.GROUND, start_id)


def _inside_solid(index: SpatialIndex, points: np.ndarray) -> np.ndarray:
    """A point is enclosed when the first face straight above it is seen from behind."""
    up = np.broadcast_to(np.array([0.0, 0.0, 1.0]), points.shape)
    _, tri = index.ray_cast_many(points, up, np.inf)
    hit = tri >= 0
    inside = np.zeros(len(points), dtype=bool)
    inside[hit] = index.mesh.face_normals[tri[hit], 2] > 0
    return inside


def generate_aerial_candidates(
    mesh: TriangleMesh,
    index: SpatialIndex,
    lattice_spacing: float,
    standoff: float,
    alt_band: Sequence[float],
    slope_deg: float = 30.0,
    start_id: int = 0,
) -> List[Viewpoint]:
    """Drone positions on a 3D lattice around the scene.

    Keeps lattice points that are outside every solid, at least ``standoff``
    from all geometry and whose height above the surface below them lies in
    ``alt_band`` (inclusive). Ids run z outer, then y, then x.
    """
    alt_min, alt_max = alt_band
    if lattice_spacing <= 0 or standoff <= 0:
        raise InvalidGeometry("lattice_spacing and standoff must be positive")
    if alt_min > alt_max:
        raise InvalidGeometry(f"invalid altitude band {tuple(alt_band)}")

    lo, hi = mesh.bounds()
    lo, hi = lo - standoff, hi + standoff
    gz, gy, gx = np.meshgrid(
        _axis_range(lo[2], hi[2], lattice_spacing),
        _axis_range(lo[1], hi[1], lattice_spacing),
        _axis_range(lo[0], hi[0], lattice_spacing),
        indexing="ij",
    )
    nodes = np.column_stack((gx.ravel(), gy.ravel(), gz.ravel()))

    ground = up_facing(mesh, slope_deg)
    if np.any(ground):
        scene_ground = float(mesh.vertices[mesh.triangles[ground]][..., 2].min())
    else:
        scene_ground = float(mesh.bounds()[0][2])
    z, found = first_ground_below(index, nodes, ground)
    altitude = nodes[:, 2] - np.where(found, z, scene_ground)
    in_band = (altitude >= alt_min) & (altitude <= alt_max)

    keep = in_band.copy()
    keep[keep] = ~_inside_solid(index, nodes[keep])
    keep[keep] = ~_too_close(index, nodes[keep], standoff)
    positions = nodes[keep]

    logger.info(
        f"Aerial candidates: {len(positions)} of {len(nodes)} lattice points "
        f"({int((~in_band).sum())} outside altitude band)"
    )
    return _as_viewpoints(positions, AgentClass.AERIAL, start_id)
