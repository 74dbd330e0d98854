"""Core geometric containers shared by every stage of the planner.

All lengths are meters in a right-handed, z-up frame.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

Point3 = Tuple[float, float, float]

DEGENERATE_AREA = 1e-10


class ScanPlanError(Exception):
    """Base class for every domain error raised by the toolkit."""
    pass


class GeometryError(ScanPlanError):
    """Invalid or unusable geometry."""
    pass


class EmptyMesh(GeometryError):
    pass


class EmptyCloud(GeometryError):
    pass


class InvalidGeometry(GeometryError):
    pass


def _as_points(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidGeometry(f"{name} must have shape (N, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidGeometry(f"{name} contains NaN or Inf coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points with optional unit normals and per-point sensor origins."""

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    origins: Optional[np.ndarray] = None

    def __post_init__(self):
        points = _as_points(self.points, "points")
        object.__setattr__(self, "points", points)
        for name in ("normals", "origins"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = _as_points(value, name)
            if len(arr) != len(points):
                raise InvalidGeometry(
                    f"{name} length {len(arr)} does not match {len(points)} points"
                )
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @property
    def has_origins(self) -> bool:
        return self.origins is not None

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        return PointCloud(self.points, normals, self.origins)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            raise EmptyCloud("cannot compute bounds of an empty cloud")
        return self.points.min(axis=0), self.points.max(axis=0)

    @classmethod
    def concatenate(cls, clouds: Iterable["PointCloud"]) -> "PointCloud":
        """Merge clouds; normals/origins survive only if every input has them."""
        clouds = list(clouds)
        if not clouds:
            return cls(np.empty((0, 3)))
        points = np.concatenate([c.points for c in clouds])
        normals = None
        origins = None
        if all(c.has_normals for c in clouds):
            normals = np.concatenate([c.normals for c in clouds])
        if all(c.has_origins for c in clouds):
            origins = np.concatenate([c.origins for c in clouds])
        return cls(points, normals, origins)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            np.array_equal(self.points, other.points)
            and _optional_equal(self.normals, other.normals)
            and _optional_equal(self.origins, other.origins)
        )


def _optional_equal(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh with derived per-face normals and areas."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = _as_points(self.vertices, "vertices")
        triangles = np.array(self.triangles, dtype=np.int64, copy=True)
        if triangles.size == 0:
            triangles = triangles.reshape(0, 3)
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise InvalidGeometry(f"triangles must have shape (T, 3), got {triangles.shape}")
        if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InvalidGeometry("triangle index out of range")
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    @cached_property
    def corners(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = self.triangles
        return self.vertices[t[:, 0]], self.vertices[t[:, 1]], self.vertices[t[:, 2]]

    @cached_property
    def _cross(self) -> np.ndarray:
        a, b, c = self.corners
        return np.cross(b - a, c - a)

    @cached_property
    def face_areas(self) -> np.ndarray:
        areas = 0.5 * np.linalg.norm(self._cross, axis=1)
        areas.setflags(write=False)
        return areas

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit normals by the right-hand rule; zero rows for degenerate faces."""
        cross = self._cross
        lengths = np.linalg.norm(cross, axis=1)
        normals = np.zeros_like(cross)
        ok = lengths > 0
        normals[ok] = cross[ok] / lengths[ok, None]
        normals.setflags(write=False)
        return normals

    @cached_property
    def face_centroids(self) -> np.ndarray:
        a, b, c = self.corners
        return (a + b + c) / 3.0

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            raise EmptyMesh("cannot compute bounds of an empty mesh")
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)

    def transformed(self, scale: float = 1.0, offset: Sequence[float] = (0.0, 0.0, 0.0)) -> "TriangleMesh":
        return TriangleMesh(self.vertices * scale + np.asarray(offset, dtype=np.float64), self.triangles)

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    @classmethod
    def concatenate(cls, meshes: Iterable["TriangleMesh"]) -> "TriangleMesh":
        vertices, triangles = [], []
        offset = 0
        for mesh in meshes:
            vertices.append(mesh.vertices)
            triangles.append(mesh.triangles + offset)
            offset += len(mesh.vertices)
        if not vertices:
            return cls.empty()
        return cls(np.concatenate(vertices), np.concatenate(triangles))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices) and np.array_equal(
            self.triangles, other.triangles
        )


@dataclass(frozen=True)
class RayHit:
    """Nearest intersection along a ray."""
    t: float
    triangle_id: int
    point: Point3
