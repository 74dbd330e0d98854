"""Surface sampling into weighted coverage atoms."""

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from src.geometry.types import DEGENERATE_AREA, EmptyMesh, InvalidGeometry, Point3, TriangleMesh

logger = logging.getLogger(__name__)

# Plastic number; its powers give the 2D R2 low-discrepancy sequence.
PLASTIC = 1.32471795724474602596
R2_STEP = np.array([1.0 / PLASTIC, 1.0 / PLASTIC ** 2])
R2_SEED = 1.0 / 3.0


@dataclass(frozen=True)
class SurfaceSample:
    id: int
    point: Point3
    normal: Point3
    triangle_id: int
    weight_area: float


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Column-wise storage of surface samples; indexing yields SurfaceSample."""

    points: np.ndarray
    normals: np.ndarray
    triangle_ids: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> SurfaceSample:
        p, n = self.points[i], self.normals[i]
        return SurfaceSample(
            id=int(i),
            point=(float(p[0]), float(p[1]), float(p[2])),
            normal=(float(n[0]), float(n[1]), float(n[2])),
            triangle_id=int(self.triangle_ids[i]),
            weight_area=float(self.weights[i]),
        )

    def __iter__(self) -> Iterator[SurfaceSample]:
        return (self[i] for i in range(len(self)))

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def from_samples(cls, samples: Sequence[SurfaceSample]) -> "SampleSet":
        """Pack SurfaceSample records; ids must be 0..n-1 in order."""
        if any(s.id != i for i, s in enumerate(samples)):
            raise InvalidGeometry("sample ids must be consecutive from 0")
        return cls(
            points=np.array([s.point for s in samples], dtype=np.float64).reshape(-1, 3),
            normals=np.array([s.normal for s in samples], dtype=np.float64).reshape(-1, 3),
            triangle_ids=np.array([s.triangle_id for s in samples], dtype=np.int64),
            weights=np.array([s.weight_area for s in samples], dtype=np.float64),
        )


def r2_sequence(count: int) -> np.ndarray:
    """First ``count`` points of the R2 sequence folded into the unit triangle."""
    j = np.arange(count, dtype=np.float64)[:, None]
    uv = np.mod(R2_SEED + j * R2_STEP, 1.0)
    fold = uv.sum(axis=1) > 1.0
    uv[fold] = 1.0 - uv[fold]
    return uv


def sample_surface(mesh: TriangleMesh, spacing: float) -> SampleSet:
    """Place about one sample per ``spacing``² of area on every triangle.

    Triangle t gets ``max(1, round(area_t / spacing²))`` samples, each
    weighted ``area_t / n_t``. Degenerate triangles carry no area and get none.
    """
    if mesh.is_empty:
        raise EmptyMesh("cannot sample an empty mesh")
    if spacing <= 0:
        raise InvalidGeometry("sample spacing must be positive")

    areas = mesh.face_areas
    tri_ids = np.flatnonzero(areas > DEGENERATE_AREA)
    if len(tri_ids) == 0:
        raise EmptyMesh("mesh has no triangle with positive area")
    counts = np.maximum(1, np.rint(areas[tri_ids] / spacing ** 2).astype(np.int64))

    owner = np.repeat(tri_ids, counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    uv = r2_sequence(int(counts.max()))[np.arange(len(owner)) - starts]

    a, b, c = (corner[owner] for corner in mesh.corners)
    points = a + uv[:, :1] * (b - a) + uv[:, 1:] * (c - a)
    weights = np.repeat(areas[tri_ids] / counts, counts)

    samples = SampleSet(
        points=points,
        normals=mesh.face_normals[owner],
        triangle_ids=owner,
        weights=weights,
    )
    logger.info(f"Sampled {len(samples)} atoms on {len(tri_ids)} triangles (spacing {spacing} m)")
    return samples
