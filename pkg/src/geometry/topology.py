"""Edge and component diagnostics for triangle meshes."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.geometry.types import TriangleMesh


@dataclass(frozen=True)
class TopologyReport:
    boundary_edges: int
    non_manifold_edges: int
    components: int
    total_area: float

    @property
    def watertight(self) -> bool:
        return self.boundary_edges == 0 and self.non_manifold_edges == 0


def edge_counts(mesh: TriangleMesh) -> np.ndarray:
    """How many triangles use each distinct undirected edge."""
    t = mesh.triangles
    edges = np.concatenate((t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]))
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


def triangle_components(mesh: TriangleMesh) -> np.ndarray:
    """Component label per triangle (triangles sharing a vertex are connected).

    Labels are numbered in order of first appearance in the triangle list.
    """
    if mesh.is_empty:
        return np.empty(0, dtype=np.int64)
    t = mesh.triangles
    n = len(mesh.vertices)
    rows = np.concatenate((t[:, 0], t[:, 1], t[:, 2]))
    cols = np.concatenate((t[:, 1], t[:, 2], t[:, 0]))
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, vertex_labels = connected_components(graph, directed=False)
    raw = vertex_labels[t[:, 0]]
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse]


def mesh_topology_report(mesh: TriangleMesh) -> TopologyReport:
    if mesh.is_empty:
        return TopologyReport(0, 0, 0, 0.0)
    counts = edge_counts(mesh)
    labels = triangle_components(mesh)
    return TopologyReport(
        boundary_edges=int(np.sum(counts == 1)),
        non_manifold_edges=int(np.sum(counts > 2)),
        components=int(labels.max()) + 1,
        total_area=mesh.total_area,
    )
