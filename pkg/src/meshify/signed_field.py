"""Truncated point-to-tangent-plane signed distance sampled on a voxel grid."""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from src.geometry.types import EmptyCloud, InvalidGeometry, PointCloud
from src.meshify.errors import GridTooLarge

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 64_000_000


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Scalar field on the nodes of a regular grid.

    ``values`` and ``known`` have shape ``(nx + 1, ny + 1, nz + 1)``; node
    ``(i, j, k)`` sits at ``origin + voxel_size * (i, j, k)``. Negative values
    are inside, positive outside.
    """

    origin: np.ndarray
    voxel_size: float
    dims: Tuple[int, int, int]
    values: np.ndarray
    known: np.ndarray
    truncation: float

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise InvalidGeometry("voxel_size must be positive")
        if any(d < 1 for d in self.dims):
            raise InvalidGeometry(f"grid dims must be >= 1, got {self.dims}")
        shape = tuple(d + 1 for d in self.dims)
        if self.values.shape != shape or self.known.shape != shape:
            raise InvalidGeometry(f"field arrays must have shape {shape}")

    @property
    def node_count(self) -> int:
        return int(np.prod(self.values.shape))

    def node_positions(self, ijk: np.ndarray) -> np.ndarray:
        return self.origin + self.voxel_size * np.asarray(ijk, dtype=np.float64)


def grid_layout(lo: np.ndarray, hi: np.ndarray, voxel_size: float, truncation: float):
    """Origin and cell dims enclosing [lo, hi] with a margin wider than ``truncation``."""
    pad = math.ceil(truncation / voxel_size) + 1
    origin = lo - pad * voxel_size
    extent = np.ceil((hi - lo) / voxel_size).astype(np.int64)
    dims = tuple(int(max(1, e + 2 * pad)) for e in extent)
    return origin, dims


def build_signed_field(
    cloud: PointCloud,
    voxel_size: float,
    truncation: float,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> VoxelGrid:
    if len(cloud) == 0:
        raise EmptyCloud("cannot build a field from an empty cloud")
    if not cloud.has_normals:
        raise InvalidGeometry("signed field needs a cloud with normals")
    if voxel_size <= 0:
        raise InvalidGeometry("voxel_size must be positive")
    if truncation < 2 * voxel_size:
        raise InvalidGeometry(f"truncation {truncation} is below two voxels ({2 * voxel_size})")

    lo, hi = cloud.bounds()
    origin, dims = grid_layout(lo, hi, voxel_size, truncation)
    shape = tuple(d + 1 for d in dims)
    n_nodes = math.prod(shape)
    if n_nodes > max_nodes:
        raise GridTooLarge(f"grid {shape} has {n_nodes} nodes, cap is {max_nodes}")

    # Only nodes near a point can be within the truncation band.
    nearest = np.rint((cloud.points - origin) / voxel_size).astype(np.int64)
    seeds = np.zeros(shape, dtype=bool)
    seeds[nearest[:, 0], nearest[:, 1], nearest[:, 2]] = True
    reach = math.ceil(truncation / voxel_size) + 1
    band = ndimage.binary_dilation(seeds, structure=np.ones((3, 3, 3), dtype=bool), iterations=reach)

    ijk = np.argwhere(band)
    nodes = origin + voxel_size * ijk
    dist, nearest_point = cKDTree(cloud.points).query(nodes, distance_upper_bound=truncation * (1 + 1e-12))
    hit = np.isfinite(dist)
    ijk, nodes, nearest_point = ijk[hit], nodes[hit], nearest_point[hit]

    offset = nodes - cloud.points[nearest_point]
    signed = np.einsum("ij,ij->i", offset, cloud.normals[nearest_point])

    values = np.full(shape, truncation, dtype=np.float64)
    known = np.zeros(shape, dtype=bool)
    values[ijk[:, 0], ijk[:, 1], ijk[:, 2]] = np.clip(signed, -truncation, truncation)
    known[ijk[:, 0], ijk[:, 1], ijk[:, 2]] = True

    logger.info(f"Signed field: grid {shape}, {len(ijk)} known nodes of {n_nodes}")
    return VoxelGrid(
        origin=np.asarray(origin, dtype=np.float64),
        voxel_size=float(voxel_size),
        dims=dims,
        values=values,
        known=known,
        truncation=float(truncation),
    )
