"""Check a plan against ground truth instead of the model it was planned on."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from src.formats.plan_io import ScanPlan
from src.geometry.spatial_index import SpatialIndex
from src.geometry.types import PointCloud
from src.planning.sampling import SampleSet
from src.planning.sensors import AgentClass, SensorModel
from src.planning.visibility import build_coverage
from src.simulation.errors import EmptyPlan
from src.solver.set_cover import covered_weight

logger = logging.getLogger(__name__)


@dataclass
class CoverageReport:
    achieved_fraction: float
    hit_counts: np.ndarray
    residual_ids: List[int]
    mean_spacing: Optional[float]
    unique_contribution: Dict[int, float] = field(default_factory=dict)
    ground_covered: Optional[np.ndarray] = None
    aerial_covered: Optional[np.ndarray] = None

    @property
    def covered(self) -> np.ndarray:
        return self.hit_counts > 0

    def to_dict(self) -> dict:
        return {
            "achieved_fraction": float(f"{self.achieved_fraction:.9g}"),
            "covered_samples": int(self.covered.sum()),
            "sample_count": int(len(self.hit_counts)),
            "residual_ids": list(self.residual_ids),
            "mean_spacing": None if self.mean_spacing is None else float(f"{self.mean_spacing:.9g}"),
            "unique_contribution": {str(k): float(f"{v:.9g}") for k, v in self.unique_contribution.items()},
        }


def evaluate_plan(
    samples: SampleSet,
    plan: ScanPlan,
    index: SpatialIndex,
    sensors: Mapping[AgentClass, SensorModel],
    weights: Optional[np.ndarray] = None,
    clouds: Sequence[PointCloud] = (),
    workers: int = 1,
) -> CoverageReport:
    """Visibility of the planned viewpoints on ground-truth samples.

    ``unique_contribution`` maps each viewpoint to the weight fraction only it
    covers. ``mean_spacing`` is the mean distance from covered samples to the
    nearest point of ``clouds``, when scans are supplied.
    """
    viewpoints = plan.viewpoints()
    if not viewpoints:
        raise EmptyPlan("plan selects no viewpoints")
    weights = samples.weights if weights is None else np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())

    matrix = build_coverage(viewpoints, samples, sensors, index, workers=workers)
    counts = matrix.bits.sum(axis=0).astype(np.int64)
    covered = counts > 0
    achieved = covered_weight(covered, weights) / total

    solo = matrix.bits & (counts == 1)
    unique = {vp.id: covered_weight(solo[row], weights) / total for row, vp in enumerate(viewpoints)}

    is_ground = np.array([vp.agent_class is AgentClass.GROUND for vp in viewpoints])
    ground_covered = matrix.bits[is_ground].any(axis=0) if is_ground.any() else np.zeros(len(samples), dtype=bool)
    aerial_covered = matrix.bits[~is_ground].any(axis=0) if (~is_ground).any() else np.zeros(len(samples), dtype=bool)

    spacing = None
    scanned = [c.points for c in clouds if len(c)]
    if scanned and covered.any():
        dist, _ = cKDTree(np.concatenate(scanned)).query(samples.points[covered])
        spacing = float(dist.mean())

    logger.info(
        f"Evaluated {len(viewpoints)} viewpoints on {len(samples)} ground-truth samples: "
        f"achieved {achieved:.4f} (planned {plan.planned_fraction:.4f})"
    )
    return CoverageReport(
        achieved_fraction=achieved,
        hit_counts=counts,
        residual_ids=np.flatnonzero(~covered).tolist(),
        mean_spacing=spacing,
        unique_contribution=unique,
        ground_covered=ground_covered,
        aerial_covered=aerial_covered & ~ground_covered,
    )
