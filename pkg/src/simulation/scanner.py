"""Ray-cast laser scanner simulation against a ground-truth mesh."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.geometry.spatial_index import SpatialIndex
from src.geometry.types import Point3, PointCloud
from src.planning.candidates import Viewpoint
from src.planning.sensors import AgentClass, SensorModel

logger = logging.getLogger(__name__)

NOISE_STREAM = 0
JITTER_STREAM = 1


@dataclass(frozen=True)
class ScanConfig:
    sensor: SensorModel
    angular_resolution: float
    seed: int = 0
    pose_jitter_sigma: float = 0.0

    def __post_init__(self):
        if self.angular_resolution <= 0:
            raise ValueError("angular_resolution must be positive")
        if self.pose_jitter_sigma < 0:
            raise ValueError("pose_jitter_sigma must be >= 0")


def _steps(start: float, span: float, step: float, closed: bool) -> np.ndarray:
    count = int(math.floor(span / step + 1e-9)) + (1 if closed else 0)
    if not closed and count * step < span - 1e-9:
        count += 1
    return start + step * np.arange(max(count, 1))


def ray_lattice(sensor: SensorModel, resolution: float, heading: float = 0.0) -> np.ndarray:
    """Unit directions, elevation-major, covering the sensor field of view."""
    if sensor.panoramic:
        azimuth = _steps(0.0, 360.0, resolution, closed=False)
    else:
        azimuth = _steps(heading - sensor.horizontal_fov / 2.0, sensor.horizontal_fov, resolution, closed=True)
    elevation = _steps(sensor.min_elevation, sensor.max_elevation - sensor.min_elevation, resolution, closed=True)
    el, az = np.meshgrid(np.radians(elevation), np.radians(azimuth), indexing="ij")
    return np.column_stack(
        ((np.cos(el) * np.cos(az)).ravel(), (np.cos(el) * np.sin(az)).ravel(), np.sin(el).ravel())
    )


def simulate_scan(index: SpatialIndex, vp: Viewpoint, cfg: ScanConfig) -> PointCloud:
    """Points where the lattice rays from ``vp`` land, with seeded range noise.

    Noise for ray k of viewpoint v always comes from the stream keyed by
    (seed, v, 0), so results do not depend on scheduling.
    """
    sensor = cfg.sensor
    origin = np.asarray(vp.position, dtype=np.float64)
    dirs = ray_lattice(sensor, cfg.angular_resolution, vp.heading or 0.0)
    t, _ = index.ray_cast_many(np.broadcast_to(origin, dirs.shape), dirs, sensor.max_range)
    hit = np.isfinite(t) & (t >= sensor.min_range)

    r = t[hit]
    if sensor.range_noise_sigma > 0:
        rng = np.random.default_rng([cfg.seed, vp.id, NOISE_STREAM])
        r = r + rng.normal(0.0, sensor.range_noise_sigma, size=len(dirs))[hit]
    points = origin + r[:, None] * dirs[hit]
    logger.debug(f"Scan from viewpoint {vp.id}: {len(points)} points of {len(dirs)} rays")
    return PointCloud(points, origins=np.broadcast_to(origin, points.shape))


def scan_all(index: SpatialIndex, viewpoints: Sequence[Viewpoint], cfg: ScanConfig, workers: int = 1) -> List[PointCloud]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(lambda vp: simulate_scan(index, vp, cfg), viewpoints))
    return [simulate_scan(index, vp, cfg) for vp in viewpoints]


def simulate_coarse_survey(
    index: SpatialIndex, waypoints: Sequence[Point3], cfg: ScanConfig, workers: int = 1
) -> PointCloud:
    """Quick walk-through scan: sparse, noisy and registered to believed poses.

    The scanner actually stands at waypoint + jitter but every point is
    recorded relative to the waypoint, which smears surfaces the way motion
    distortion does.
    """
    if len(waypoints) == 0:
        raise ValueError("coarse survey needs at least one waypoint")
    believed = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    jitter = np.zeros_like(believed)
    if cfg.pose_jitter_sigma > 0:
        for i in range(len(believed)):
            rng = np.random.default_rng([cfg.seed, i, JITTER_STREAM])
            jitter[i] = rng.normal(0.0, cfg.pose_jitter_sigma, size=3)

    actual = [
        Viewpoint(id=i, position=tuple(float(c) for c in believed[i] + jitter[i]), agent_class=AgentClass.GROUND)
        for i in range(len(believed))
    ]
    clouds = scan_all(index, actual, cfg, workers)
    registered = [
        PointCloud(cloud.points - jitter[i], origins=np.broadcast_to(believed[i], cloud.points.shape))
        for i, cloud in enumerate(clouds)
    ]
    merged = PointCloud.concatenate(registered)
    logger.info(f"Coarse survey: {len(believed)} waypoints, {len(merged)} points")
    return merged
