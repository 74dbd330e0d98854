"""Sensor-constrained, occlusion-aware visibility between viewpoints and samples."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np

from src.geometry.spatial_index import SpatialIndex
from src.planning.candidates import Viewpoint
from src.planning.errors import EmptyInput
from src.planning.sampling import SampleSet, SurfaceSample
from src.planning.sensors import AgentClass, SensorModel

logger = logging.getLogger(__name__)

OCCLUSION_ABS_TOL = 1e-4
OCCLUSION_REL_TOL = 1e-4


def visible_samples(
    vp: Viewpoint,
    points: np.ndarray,
    normals: np.ndarray,
    sensor: SensorModel,
    index: SpatialIndex,
) -> np.ndarray:
    """Boolean mask of the samples ``vp`` can count under ``sensor``."""
    origin = np.asarray(vp.position, dtype=np.float64)
    delta = points - origin
    dist = np.linalg.norm(delta, axis=1)
    ok = (dist >= sensor.min_range) & (dist <= sensor.max_range) & (dist > 0)

    safe = np.where(dist > 0, dist, 1.0)
    dirs = delta / safe[:, None]
    elevation = np.degrees(np.arcsin(np.clip(dirs[:, 2], -1.0, 1.0)))
    ok &= (elevation >= sensor.min_elevation) & (elevation <= sensor.max_elevation)
    if not sensor.panoramic:
        heading = vp.heading or 0.0
        azimuth = np.degrees(np.arctan2(dirs[:, 1], dirs[:, 0]))
        off_axis = np.mod(azimuth - heading + 180.0, 360.0) - 180.0
        ok &= np.abs(off_axis) <= sensor.horizontal_fov / 2.0

    cos_incidence = -np.einsum("ij,ij->i", normals, dirs)
    incidence = np.degrees(np.arccos(np.clip(cos_incidence, -1.0, 1.0)))
    ok &= (cos_incidence > 0) & (incidence <= sensor.max_incidence)

    candidates = np.flatnonzero(ok)
    if candidates.size == 0:
        return ok
    # The first hit must lie within tol of the sample: nothing may block the
    # ray before d - tol, and the sample's own surface must answer in
    # [d - tol, d + tol]. The second check only traces a 2 * tol segment.
    d = dist[candidates]
    tol = np.maximum(OCCLUSION_ABS_TOL, OCCLUSION_REL_TOL * d)
    ray_dirs = dirs[candidates]
    clear = ~index.occluded_many(np.broadcast_to(origin, (len(candidates), 3)), ray_dirs, d - tol)
    candidates, d, tol, ray_dirs = candidates[clear], d[clear], tol[clear], ray_dirs[clear]
    ok[:] = False
    if candidates.size:
        near = origin + (d - tol)[:, None] * ray_dirs
        t, _ = index.ray_cast_many(near, ray_dirs, 2 * tol)
        ok[candidates] = np.isfinite(t)
    return ok


def visibility_test(vp: Viewpoint, s: SurfaceSample, sensor: SensorModel, index: SpatialIndex) -> bool:
    """Whether sample ``s`` is in range, in view, not grazing and unoccluded from ``vp``."""
    mask = visible_samples(
        vp,
        np.asarray([s.point], dtype=np.float64),
        np.asarray([s.normal], dtype=np.float64),
        sensor,
        index,
    )
    return bool(mask[0])


@dataclass(frozen=True, eq=False)
class CoverageMatrix:
    """Candidate x sample visibility bits; row order follows ``candidates``."""

    candidates: List[Viewpoint]
    samples: SampleSet
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (len(self.candidates), len(self.samples)):
            raise ValueError(
                f"bits shape {self.bits.shape} does not match "
                f"{len(self.candidates)} candidates x {len(self.samples)} samples"
            )

    @property
    def ids(self) -> np.ndarray:
        return np.array([vp.id for vp in self.candidates], dtype=np.int64)

    def row_of(self, vp_id: int) -> int:
        matches = np.flatnonzero(self.ids == vp_id)
        if matches.size == 0:
            raise KeyError(f"viewpoint {vp_id} is not a candidate")
        return int(matches[0])

    def union(self, vp_ids: Iterable[int] = None) -> np.ndarray:
        """Samples seen by any of ``vp_ids`` (all candidates when omitted)."""
        if vp_ids is None:
            return self.bits.any(axis=0)
        rows = [self.row_of(i) for i in vp_ids]
        if not rows:
            return np.zeros(len(self.samples), dtype=bool)
        return self.bits[rows].any(axis=0)

    def hit_counts(self, vp_ids: Iterable[int] = None) -> np.ndarray:
        rows = self.bits if vp_ids is None else self.bits[[self.row_of(i) for i in vp_ids]]
        return rows.sum(axis=0).astype(np.int64)

    def row_coverage(self, weights: np.ndarray) -> np.ndarray:
        """Weighted coverage fraction of each row on its own."""
        total = float(np.sum(weights))
        return np.where(self.bits, weights, 0.0).sum(axis=1) / total

    def subset(self, vp_ids: Sequence[int]) -> "CoverageMatrix":
        rows = [self.row_of(i) for i in vp_ids]
        return CoverageMatrix([self.candidates[r] for r in rows], self.samples, self.bits[rows])

    def stacked(self, other: "CoverageMatrix") -> "CoverageMatrix":
        return CoverageMatrix(self.candidates + other.candidates, self.samples, np.vstack((self.bits, other.bits)))


def build_coverage(
    candidates: Sequence[Viewpoint],
    samples: SampleSet,
    sensors: Mapping[AgentClass, SensorModel],
    index: SpatialIndex,
    workers: int = 1,
) -> CoverageMatrix:
    """Evaluate every candidate row; rows are independent, so workers only change speed."""
    if len(candidates) == 0 or len(samples) == 0:
        raise EmptyInput(f"need candidates and samples, got {len(candidates)} and {len(samples)}")
    start = time.perf_counter()

    def row(vp: Viewpoint) -> np.ndarray:
        return visible_samples(vp, samples.points, samples.normals, sensors[vp.agent_class], index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(row, candidates))
    else:
        rows = [row(vp) for vp in candidates]

    bits = np.vstack(rows)
    logger.info(
        f"Coverage matrix {bits.shape[0]}x{bits.shape[1]}: {int(bits.sum())} visible pairs "
        f"in {time.perf_counter() - start:.1f}s ({workers} worker{'s' if workers > 1 else ''})"
    )
    return CoverageMatrix(list(candidates), samples, bits)


def sensors_by_class(ground: SensorModel, aerial: SensorModel) -> Dict[AgentClass, SensorModel]:
    return {AgentClass.GROUND: ground, AgentClass.AERIAL: aerial}
