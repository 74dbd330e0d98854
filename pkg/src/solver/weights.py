"""Per-sample importance weights for the set-cover objective."""

import logging
import math
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from src.geometry.types import PointCloud
from src.planning.sampling import SampleSet
from src.solver.errors import MissingPrior

logger = logging.getLogger(__name__)

DENSITY_RADIUS = 0.25


class WeightMode(str, Enum):
    UNIFORM = "uniform"
    DENSITY_DEFICIT = "density_deficit"


def validate_weights(weights: np.ndarray, n_samples: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} weights, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError("weights must be finite and non-negative")
    if not np.any(weights > 0):
        raise ValueError("weights are all zero")
    return weights


def compute_weights(
    samples: SampleSet,
    prior_cloud: Optional[PointCloud] = None,
    mode: WeightMode = WeightMode.UNIFORM,
    rho_ref: float = 400.0,
    radius: float = DENSITY_RADIUS,
) -> np.ndarray:
    """Sample areas, optionally discounted where a prior scan is already dense.

    In density-deficit mode each area is divided by ``1 + rho / rho_ref``,
    with ``rho`` the prior point count within ``radius`` per disc area.
    """
    mode = WeightMode(mode)
    if mode is WeightMode.UNIFORM:
        return validate_weights(samples.weights.copy(), len(samples))

    if prior_cloud is None or len(prior_cloud) == 0:
        raise MissingPrior("density-deficit weights need a prior point cloud")
    if rho_ref <= 0:
        raise ValueError("rho_ref must be positive")

    counts = cKDTree(prior_cloud.points).query_ball_point(samples.points, radius, return_length=True)
    density = np.asarray(counts, dtype=np.float64) / (math.pi * radius ** 2)
    weights = samples.weights / (1.0 + density / rho_ref)
    logger.info(
        f"Density-deficit weights: median prior density {np.median(density):.0f} pts/m^2, "
        f"total weight {weights.sum():.2f} of {samples.total_weight:.2f} m^2"
    )
    return validate_weights(weights, len(samples))
