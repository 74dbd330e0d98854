"""Bounding-volume hierarchy over a triangle mesh.

Queries are evaluated in batches: a frontier of (query, node) pairs is expanded
level by level with numpy, so many rays share one traversal. Leaf tests use
the same intersection kernel as the exhaustive oracle, which keeps indexed and
brute-force answers bit-identical.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.geometry.types import EmptyMesh, InvalidGeometry, RayHit, TriangleMesh

logger = logging.getLogger(__name__)

LEAF_SIZE = 4
DET_EPS = 1e-9
T_MIN = 1e-6
BARY_EPS = 1e-9
BOX_PAD = 1e-7
CHUNK = 1 << 15


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        (
            a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
            a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
            a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
        ),
        axis=1,
    )


def intersect_triangles(
    origins: np.ndarray, dirs: np.ndarray, v0: np.ndarray, e1: np.ndarray, e2: np.ndarray
) -> np.ndarray:
    """Moller-Trumbore test, row by row. Returns t, or inf where there is no hit."""
    pvec = _cross(dirs, e2)
    det = _dot(e1, pvec)
    ok = np.abs(det) > DET_EPS
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    tvec = origins - v0
    u = _dot(tvec, pvec) * inv
    qvec = _cross(tvec, e1)
    v = _dot(dirs, qvec) * inv
    t = _dot(e2, qvec) * inv
    hit = ok & (u >= -BARY_EPS) & (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    return np.where(hit, t, np.inf)


def closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest point on each triangle (a, b, c) to the matching row of p."""
    ab, ac = b - a, c - a
    ap, bp, cp = p - a, p - b, p - c
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        result = a + ab * v[:, None] + ac * w[:, None]

        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        on_bc = b + (c - b) * w_bc[:, None]
        w_ac = d2 / (d2 - d6)
        on_ac = a + ac * w_ac[:, None]
        v_ab = d1 / (d1 - d3)
        on_ab = a + ab * v_ab[:, None]

    # Regions in reverse priority so the earliest test wins.
    regions = [
        ((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), on_bc),
        ((vb <= 0) & (d2 >= 0) & (d6 <= 0), on_ac),
        ((d6 >= 0) & (d5 <= d6), c),
        ((vc <= 0) & (d1 >= 0) & (d3 <= 0), on_ab),
        ((d3 >= 0) & (d4 <= d3), b),
        ((d1 <= 0) & (d2 <= 0), a),
    ]
    for mask, candidate in regions:
        result = np.where(mask[:, None], candidate, result)
    bad = ~np.all(np.isfinite(result), axis=1)
    if np.any(bad):
        result[bad] = a[bad]
    return result


def _slab(origins: np.ndarray, inv_dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    with np.errstate(invalid="ignore"):
        t1 = (lo - origins) * inv_dirs
        t2 = (hi - origins) * inv_dirs
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    return near.max(axis=1), far.min(axis=1)


class SpatialIndex:
    """Immutable BVH built by median split on the longest centroid axis."""

    def __init__(self, mesh: TriangleMesh):
        if mesh.is_empty:
            raise EmptyMesh("cannot index a mesh with no triangles")
        self.mesh = mesh
        a, b, c = mesh.corners
        self._v0 = a
        self._e1 = b - a
        self._e2 = c - a
        self._build()
        self._centroid_tree = cKDTree(mesh.face_centroids)
        logger.debug(f"Built BVH: {len(mesh)} triangles, {len(self.node_lo)} nodes")

    def _build(self) -> None:
        a, b, c = self.mesh.corners
        tri_lo = np.minimum(np.minimum(a, b), c)
        tri_hi = np.maximum(np.maximum(a, b), c)
        centroids = self.mesh.face_centroids

        lo: List[np.ndarray] = []
        hi: List[np.ndarray] = []
        left: List[int] = []
        right: List[int] = []
        leaf_tris: List[List[int]] = []

        def new_node(ids: np.ndarray) -> int:
            lo.append(tri_lo[ids].min(axis=0) - BOX_PAD)
            hi.append(tri_hi[ids].max(axis=0) + BOX_PAD)
            left.append(-1)
            right.append(-1)
            leaf_tris.append([])
            return len(lo) - 1

        root_ids = np.arange(len(self.mesh), dtype=np.int64)
        stack = [(new_node(root_ids), root_ids)]
        while stack:
            node, ids = stack.pop()
            if len(ids) <= LEAF_SIZE:
                leaf_tris[node] = ids.tolist()
                continue
            cent = centroids[ids]
            axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
            order = np.argsort(cent[:, axis], kind="stable")
            ids = ids[order]
            half = len(ids) // 2
            left_ids, right_ids = ids[:half], ids[half:]
            left[node] = new_node(left_ids)
            right[node] = new_node(right_ids)
            stack.append((right[node], right_ids))
            stack.append((left[node], left_ids))

        self.node_lo = np.array(lo)
        self.node_hi = np.array(hi)
        self.node_left = np.array(left, dtype=np.int64)
        self.node_right = np.array(right, dtype=np.int64)
        self.leaf_tris = np.full((len(lo), LEAF_SIZE), -1, dtype=np.int64)
        for node, tris in enumerate(leaf_tris):
            self.leaf_tris[node, : len(tris)] = tris

    # ------------------------------------------------------------------ rays

    def ray_cast_many(
        self, origins: np.ndarray, dirs: np.ndarray, t_max
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest hit per ray with t in (T_MIN, t_max].

        Returns (t, triangle_id) arrays; misses have t = inf and id = -1.
        """
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (len(origins),))
        best_t = np.full(len(origins), np.inf)
        best_id = np.full(len(origins), -1, dtype=np.int64)
        for start in range(0, len(origins), CHUNK):
            sl = slice(start, start + CHUNK)
            t, ids = self._trace(origins[sl], dirs[sl], t_max[sl])
            best_t[sl] = t
            best_id[sl] = ids
        return best_t, best_id

    def _trace(self, origins: np.ndarray, dirs: np.ndarray, t_max: np.ndarray):
        n = len(origins)
        best_t = np.full(n, np.inf)
        best_id = np.full(n, -1, dtype=np.int64)
        with np.errstate(divide="ignore"):
            inv_dirs = 1.0 / dirs

        rays = np.arange(n, dtype=np.int64)
        nodes = np.zeros(n, dtype=np.int64)
        while rays.size:
            near, far = _slab(origins[rays], inv_dirs[rays], self.node_lo[nodes], self.node_hi[nodes])
            limit = np.minimum(best_t[rays], t_max[rays])
            keep = (near <= far) & (far >= 0.0) & (near <= limit)
            rays, nodes = rays[keep], nodes[keep]

            leaf = self.node_left[nodes] < 0
            if np.any(leaf):
                leaf_rays = np.repeat(rays[leaf], LEAF_SIZE)
                tris = self.leaf_tris[nodes[leaf]].ravel()
                valid = tris >= 0
                leaf_rays, tris = leaf_rays[valid], tris[valid]
                t = intersect_triangles(
                    origins[leaf_rays], dirs[leaf_rays], self._v0[tris], self._e1[tris], self._e2[tris]
                )
                ok = (t > T_MIN) & (t <= t_max[leaf_rays])
                self._merge_best(leaf_rays[ok], tris[ok], t[ok], best_t, best_id)

            inner = ~leaf
            rays = np.concatenate((rays[inner], rays[inner]))
            nodes = np.concatenate((self.node_left[nodes[inner]], self.node_right[nodes[inner]]))
        return best_t, best_id

    def occluded_many(self, origins: np.ndarray, dirs: np.ndarray, t_max) -> np.ndarray:
        """True where the ray hits anything with t in (T_MIN, t_max).

        Rays leave the traversal at their first hit, so this is much cheaper
        than ``ray_cast_many`` when only blocking matters.
        """
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (len(origins),))
        blocked = np.zeros(len(origins), dtype=bool)
        for start in range(0, len(origins), CHUNK):
            sl = slice(start, start + CHUNK)
            blocked[sl] = self._any_hit(origins[sl], dirs[sl], t_max[sl])
        return blocked

    def _any_hit(self, origins: np.ndarray, dirs: np.ndarray, t_max: np.ndarray) -> np.ndarray:
        n = len(origins)
        blocked = np.zeros(n, dtype=bool)
        with np.errstate(divide="ignore"):
            inv_dirs = 1.0 / dirs

        rays = np.arange(n, dtype=np.int64)
        nodes = np.zeros(n, dtype=np.int64)
        while rays.size:
            near, far = _slab(origins[rays], inv_dirs[rays], self.node_lo[nodes], self.node_hi[nodes])
            keep = (near <= far) & (far >= 0.0) & (near < t_max[rays]) & ~blocked[rays]
            rays, nodes = rays[keep], nodes[keep]

            leaf = self.node_left[nodes] < 0
            if np.any(leaf):
                leaf_rays = np.repeat(rays[leaf], LEAF_SIZE)
                tris = self.leaf_tris[nodes[leaf]].ravel()
                valid = tris >= 0
                leaf_rays, tris = leaf_rays[valid], tris[valid]
                t = intersect_triangles(
                    origins[leaf_rays], dirs[leaf_rays], self._v0[tris], self._e1[tris], self._e2[tris]
                )
                blocked[leaf_rays[(t > T_MIN) & (t < t_max[leaf_rays])]] = True

            inner = ~leaf
            rays = np.concatenate((rays[inner], rays[inner]))
            nodes = np.concatenate((self.node_left[nodes[inner]], self.node_right[nodes[inner]]))
        return blocked

    @staticmethod
    def _merge_best(rays, tris, ts, best_t, best_id) -> None:
        if rays.size == 0:
            return
        order = np.lexsort((tris, ts, rays))
        rays, tris, ts = rays[order], tris[order], ts[order]
        first = np.ones(len(rays), dtype=bool)
        first[1:] = rays[1:] != rays[:-1]
        rays, tris, ts = rays[first], tris[first], ts[first]
        cur_t, cur_id = best_t[rays], best_id[rays]
        better = (ts < cur_t) | ((ts == cur_t) & (tris < cur_id))
        best_t[rays[better]] = ts[better]
        best_id[rays[better]] = tris[better]

    def ray_cast_exhaustive(self, origin: Sequence[float], direction: Sequence[float], t_max: float) -> Optional[RayHit]:
        """Reference answer: test the ray against every triangle."""
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        n = len(self.mesh)
        t = intersect_triangles(
            np.broadcast_to(origin, (n, 3)), np.broadcast_to(direction, (n, 3)), self._v0, self._e1, self._e2
        )
        t = np.where((t > T_MIN) & (t <= t_max), t, np.inf)
        tmin = t.min()
        if not np.isfinite(tmin):
            return None
        tri = int(np.flatnonzero(t == tmin)[0])
        return _make_hit(origin, direction, float(tmin), tri)

    # ------------------------------------------------------------- distances

    def closest_distance(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Exact distance from each point to the mesh, with the closest triangle id."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        dist = np.empty(len(points))
        tri = np.empty(len(points), dtype=np.int64)
        for start in range(0, len(points), CHUNK):
            sl = slice(start, start + CHUNK)
            dist[sl], tri[sl] = self._closest(points[sl])
        return dist, tri

    def _point_triangle_distance(self, pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
        a = self._v0[tris]
        closest = closest_points_on_triangles(pts, a, a + self._e1[tris], a + self._e2[tris])
        return np.linalg.norm(pts - closest, axis=1)

    def _closest(self, points: np.ndarray):
        n = len(points)
        _, seed = self._centroid_tree.query(points)
        best_id = np.asarray(seed, dtype=np.int64)
        best_d = self._point_triangle_distance(points, best_id)

        queries = np.arange(n, dtype=np.int64)
        nodes = np.zeros(n, dtype=np.int64)
        while queries.size:
            p = points[queries]
            gap = np.maximum(np.maximum(self.node_lo[nodes] - p, 0.0), p - self.node_hi[nodes])
            keep = np.linalg.norm(gap, axis=1) <= best_d[queries]
            queries, nodes = queries[keep], nodes[keep]

            leaf = self.node_left[nodes] < 0
            if np.any(leaf):
                leaf_q = np.repeat(queries[leaf], LEAF_SIZE)
                tris = self.leaf_tris[nodes[leaf]].ravel()
                valid = tris >= 0
                leaf_q, tris = leaf_q[valid], tris[valid]
                d = self._point_triangle_distance(points[leaf_q], tris)
                order = np.lexsort((tris, d, leaf_q))
                leaf_q, tris, d = leaf_q[order], tris[order], d[order]
                first = np.ones(len(leaf_q), dtype=bool)
                first[1:] = leaf_q[1:] != leaf_q[:-1]
                leaf_q, tris, d = leaf_q[first], tris[first], d[first]
                better = (d < best_d[leaf_q]) | ((d == best_d[leaf_q]) & (tris < best_id[leaf_q]))
                best_d[leaf_q[better]] = d[better]
                best_id[leaf_q[better]] = tris[better]

            inner = ~leaf
            queries = np.concatenate((queries[inner], queries[inner]))
            nodes = np.concatenate((self.node_left[nodes[inner]], self.node_right[nodes[inner]]))
        return best_d, best_id


def _make_hit(origin: np.ndarray, direction: np.ndarray, t: float, tri: int) -> RayHit:
    point = origin + t * direction
    return RayHit(t=t, triangle_id=tri, point=(float(point[0]), float(point[1]), float(point[2])))


def build_spatial_index(mesh: TriangleMesh) -> SpatialIndex:
    """Build the BVH for a mesh; deterministic for a given mesh."""
    return SpatialIndex(mesh)


def ray_cast(index: SpatialIndex, origin: Sequence[float], direction: Sequence[float], t_max: float) -> Optional[RayHit]:
    """Nearest hit with t in (1e-6, t_max]; ties on t go to the lowest triangle id."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise InvalidGeometry("ray direction must be unit length")
    if not t_max > 0:
        raise InvalidGeometry("t_max must be positive")
    origin = np.asarray(origin, dtype=np.float64)
    t, tri = index.ray_cast_many(origin[None, :], direction[None, :], t_max)
    if tri[0] < 0:
        return None
    return _make_hit(origin, direction, float(t[0]), int(tri[0]))
