"""Table-driven isosurface extraction over a VoxelGrid."""

import logging

import numpy as np

from src.geometry.types import TriangleMesh
from src.meshify.signed_field import VoxelGrid
from src.meshify.tables import CORNER_OFFSETS, EDGE_CORNERS, TRIANGLES

logger = logging.getLogger(__name__)


def _edge_geometry():
    """Axis and lower-corner offset of each of the 12 cube edges."""
    a = CORNER_OFFSETS[EDGE_CORNERS[:, 0]]
    b = CORNER_OFFSETS[EDGE_CORNERS[:, 1]]
    base = np.minimum(a, b)
    axis = np.argmax(np.abs(b - a), axis=1)
    return axis.astype(np.int64), base.astype(np.int64)


EDGE_AXIS, EDGE_BASE = _edge_geometry()


def marching_cubes(grid: VoxelGrid, iso: float = 0.0) -> TriangleMesh:
    """Extract the ``iso`` level set as a welded triangle mesh.

    Cells touching an unknown node emit nothing. Vertices live on grid edges
    and are keyed by (axis, lower node), so the output does not depend on the
    order cells are visited. Faces are wound so their normals point toward
    increasing field values.
    """
    values = grid.values
    nx, ny, nz = grid.dims
    shape = values.shape

    cube_index = np.zeros((nx, ny, nz), dtype=np.int64)
    all_known = np.ones((nx, ny, nz), dtype=bool)
    for corner, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        window = (slice(dx, dx + nx), slice(dy, dy + ny), slice(dz, dz + nz))
        cube_index |= (values[window] < iso).astype(np.int64) << corner
        all_known &= grid.known[window]

    active = all_known & (cube_index != 0) & (cube_index != 255)
    cells = np.argwhere(active)
    if len(cells) == 0:
        logger.info("Marching cubes: no sign change, empty mesh")
        return TriangleMesh.empty()

    rows = TRIANGLES[cube_index[active]]
    cell_of = np.repeat(np.arange(len(cells)), rows.shape[1]).reshape(rows.shape)
    used = rows >= 0
    edges = rows[used]
    owner = cells[cell_of[used]]

    nodes = owner + EDGE_BASE[edges]
    n_nodes = int(np.prod(shape))
    keys = EDGE_AXIS[edges] * n_nodes + np.ravel_multi_index(nodes.T, shape)
    unique_keys, vertex_ids = np.unique(keys, return_inverse=True)

    axis = unique_keys // n_nodes
    lower = np.stack(np.unravel_index(unique_keys % n_nodes, shape), axis=1)
    upper = lower + np.eye(3, dtype=np.int64)[axis]
    f0 = values[lower[:, 0], lower[:, 1], lower[:, 2]]
    f1 = values[upper[:, 0], upper[:, 1], upper[:, 2]]
    t = (iso - f0) / (f1 - f0)
    position = lower.astype(np.float64)
    position[np.arange(len(axis)), axis] += t
    vertices = grid.origin + grid.voxel_size * position

    triangles = vertex_ids.reshape(-1, 3)[:, [0, 2, 1]]
    logger.info(f"Marching cubes: {len(cells)} active cells, {len(vertices)} vertices, {len(triangles)} triangles")
    return TriangleMesh(vertices, triangles)
