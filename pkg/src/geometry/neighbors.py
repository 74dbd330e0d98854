"""k-nearest-neighbour queries on point clouds."""

from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.geometry.types import EmptyCloud, PointCloud


class PointLocator:
    """k-d tree over a cloud with exhaustive-search-compatible tie breaking."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise EmptyCloud("cannot search an empty cloud")
        self.points = cloud.points
        self.tree = cKDTree(self.points)

    def query(self, query, k: int) -> List[Tuple[int, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query, dtype=np.float64)
        k = min(k, len(self.points))
        dist, idx = self.tree.query(query, k=k)
        kth = float(np.max(dist))
        # Everything tied with the k-th distance competes on index.
        pool = np.array(self.tree.query_ball_point(query, kth * (1 + 1e-9) + 1e-12), dtype=np.int64)
        return _rank(self.points, query, pool, k)


def _rank(points: np.ndarray, query: np.ndarray, pool: np.ndarray, k: int) -> List[Tuple[int, float]]:
    d = np.linalg.norm(points[pool] - query, axis=1)
    order = np.lexsort((pool, d))[:k]
    return [(int(pool[i]), float(d[i])) for i in order]


def nearest_point(cloud: PointCloud, query, k: int) -> List[Tuple[int, float]]:
    """The k nearest points as (index, distance), ascending, ties by lowest index."""
    return PointLocator(cloud).query(query, k)


def nearest_point_exhaustive(cloud: PointCloud, query, k: int) -> List[Tuple[int, float]]:
    if len(cloud) == 0:
        raise EmptyCloud("cannot search an empty cloud")
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = np.arange(len(cloud), dtype=np.int64)
    return _rank(cloud.points, np.asarray(query, dtype=np.float64), pool, min(k, len(cloud)))
