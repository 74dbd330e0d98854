"""Per-point normal estimation by local plane fitting."""

import logging

import numpy as np
from scipy.spatial import cKDTree

from src.geometry.types import EmptyCloud, PointCloud
from src.meshify.errors import TooFewPoints

logger = logging.getLogger(__name__)


def estimate_normals(cloud: PointCloud, k: int = 12) -> PointCloud:
    """Return a copy of ``cloud`` with unit normals from k-NN PCA.

    Each normal is the eigenvector of the smallest eigenvalue of the
    neighbourhood covariance. Signs face the recorded scan origin when the
    cloud carries origins; otherwise they face away from the cloud centroid,
    which is only reliable for roughly convex scenes.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot estimate normals of an empty cloud")
    if k < 3:
        raise TooFewPoints(f"k must be >= 3, got {k}")
    if len(cloud) < k:
        raise TooFewPoints(f"{len(cloud)} points is fewer than k={k}")

    points = cloud.points
    _, idx = cKDTree(points).query(points, k=k)
    neighbours = points[idx]
    centered = neighbours - neighbours.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, vectors = np.linalg.eigh(cov)
    normals = vectors[:, :, 0]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    if cloud.has_origins:
        towards = cloud.origins - points
    else:
        towards = points - points.mean(axis=0)
    flip = np.einsum("ij,ij->i", normals, towards) < 0
    normals[flip] *= -1.0

    logger.debug(f"Estimated normals for {len(points)} points (k={k}, {int(flip.sum())} flipped)")
    return cloud.with_normals(normals)
