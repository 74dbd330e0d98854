import logging

import numpy as np

from src.geometry.topology import triangle_components
from src.geometry.types import DEGENERATE_AREA, TriangleMesh
from src.meshify.errors import AllRemoved

logger = logging.getLogger(__name__)

# Degenerate faces whose shortest edge is at most this long (metres) are
# collapsed onto that edge's midpoint instead of being deleted.
COLLAPSE_LENGTH = 1e-4
MAX_COLLAPSE_ROUNDS = 8


def compact(vertices: np.ndarray, triangles: np.ndarray) -> TriangleMesh:
    """Drop unreferenced vertices, keeping survivors in their original order."""
    used, remap = np.unique(triangles, return_inverse=True)
    return TriangleMesh(vertices[used], remap.reshape(triangles.shape))


def _roots(parent: np.ndarray) -> np.ndarray:
    while True:
        nxt = parent[parent]
        if np.array_equal(nxt, parent):
            return parent
        parent = nxt


def _repeated(triangles: np.ndarray) -> np.ndarray:
    a, b, c = triangles.T
    return (a == b) | (b == c) | (a == c)


def collapse_slivers(mesh: TriangleMesh, max_edge: float = COLLAPSE_LENGTH):
    """Weld the short edge of each sliver face.

    Marching cubes leaves near-zero-area faces where the surface passes
    within a hair of a lattice node. Deleting them opens holes; merging the
    two endpoints of the face's shortest edge removes the sliver together
    with its neighbour across that edge and keeps a closed surface closed.
    Returns the welded mesh (unreferenced vertices kept) and the number of
    edges collapsed.
    """
    vertices = mesh.vertices.copy()
    triangles = mesh.triangles.copy()
    collapsed = 0
    for _ in range(MAX_COLLAPSE_ROUNDS):
        corners = vertices[triangles]
        area = 0.5 * np.linalg.norm(
            np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1
        )
        slivers = np.flatnonzero((area <= DEGENERATE_AREA) & ~_repeated(triangles))
        if len(slivers) == 0:
            break
        parent = np.arange(len(vertices))
        merged = 0
        for f in slivers:
            ids = triangles[f]
            pairs = ((ids[0], ids[1]), (ids[1], ids[2]), (ids[2], ids[0]))
            lengths = [np.linalg.norm(vertices[u] - vertices[v]) for u, v in pairs]
            k = int(np.argmin(lengths))
            if lengths[k] > max_edge:
                continue
            u, v = pairs[k]
            # One collapse per vertex per round; later slivers wait for the next pass.
            if parent[u] != u or parent[v] != v:
                continue
            keep, gone = min(u, v), max(u, v)
            vertices[keep] = 0.5 * (vertices[keep] + vertices[gone])
            parent[gone] = keep
            merged += 1
        if merged == 0:
            break
        collapsed += merged
        triangles = _roots(parent)[triangles]
        triangles = triangles[~_repeated(triangles)]
    return TriangleMesh(vertices, triangles), collapsed


def clean_mesh(mesh: TriangleMesh, min_component_area: float) -> TriangleMesh:
    """Weld slivers, remove leftover degenerate faces and connected pieces
    smaller than ``min_component_area``."""
    welded, collapsed = collapse_slivers(mesh)
    keep = welded.face_areas > DEGENERATE_AREA
    if not np.any(keep):
        raise AllRemoved("every triangle is degenerate")
    solid = TriangleMesh(welded.vertices, welded.triangles[keep])

    labels = triangle_components(solid)
    area = np.bincount(labels, weights=solid.face_areas)
    big = area >= min_component_area
    if not np.any(big):
        raise AllRemoved(f"no component reaches {min_component_area} m^2 (largest {area.max():.4g})")
    survivors = big[labels]

    cleaned = compact(solid.vertices, solid.triangles[survivors])
    logger.info(
        f"Cleaned mesh: {collapsed} sliver edges welded, {int((~keep).sum())} degenerate faces, "
        f"{int((~big).sum())} of {len(area)} components removed, {len(cleaned)} triangles left"
    )
    return cleaned
