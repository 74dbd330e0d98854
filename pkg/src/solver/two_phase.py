"""Ground-first, aerial-second viewpoint selection."""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.planning.visibility import CoverageMatrix
from src.solver.errors import NoProgress
from src.solver.set_cover import Selection, covered_weight, greedy_select
from src.solver.weights import validate_weights
from src.utils.config import SolverConfig

logger = logging.getLogger(__name__)


@dataclass
class TwoPhaseSelection:
    ground: Selection
    aerial: Selection
    combined_covered: np.ndarray
    ground_fraction: float
    aerial_fraction: float
    combined_fraction: float
    residual_ids: List[int]
    warning: Optional[str] = None

    @property
    def viewpoint_ids(self) -> List[int]:
        return self.ground.ids + self.aerial.ids


def two_phase_plan(
    ground_matrix: Optional[CoverageMatrix],
    aerial_matrix: Optional[CoverageMatrix],
    weights: np.ndarray,
    cfg: Optional[SolverConfig] = None,
) -> TwoPhaseSelection:
    """Cover what the ground robot can, then send drones after the remainder.

    Phase 2 treats every sample covered in phase 1 as weightless and stops
    on the combined coverage. A missing matrix (no candidates of that class)
    yields an empty selection for it.
    """
    cfg = cfg or SolverConfig()
    present = [m for m in (ground_matrix, aerial_matrix) if m is not None]
    if not present:
        raise NoProgress("no candidates of either class")
    n_samples = len(present[0].samples)
    if any(len(m.samples) != n_samples for m in present):
        raise ValueError("ground and aerial matrices must share one sample list")
    weights = validate_weights(weights, n_samples)
    total = float(weights.sum())

    if ground_matrix is not None:
        ground = greedy_select(ground_matrix, weights, cfg.target_coverage, cfg.min_gain, cfg.max_views)
    else:
        ground = Selection.empty(n_samples)

    warning = None
    if aerial_matrix is None:
        aerial = Selection.empty(n_samples)
    elif ground.coverage_fraction >= cfg.target_coverage:
        # Ground alone meets the target: an aerial phase that could add
        # nothing is flagged, not raised.
        aerial = Selection.empty(n_samples)
        residual_weight = np.where(ground.covered, 0.0, weights)
        if not np.any(aerial_matrix.bits & (residual_weight > 0)):
            warning = "aerial phase made no progress: no aerial candidate sees an uncovered sample"
            logger.warning(warning)
    else:
        # NoProgress here leaves the target unmet and propagates.
        aerial = greedy_select(
            aerial_matrix,
            weights,
            cfg.target_coverage,
            cfg.min_gain,
            cfg.max_views,
            baseline=ground.covered,
        )

    combined = ground.covered | aerial.covered
    combined_fraction = covered_weight(combined, weights) / total
    residual = np.flatnonzero(~combined).tolist()
    logger.info(
        f"Two-phase plan: {len(ground)} ground + {len(aerial)} aerial viewpoints, "
        f"coverage {ground.coverage_fraction:.4f} -> {combined_fraction:.4f}, {len(residual)} samples blind"
    )
    return TwoPhaseSelection(
        ground=ground,
        aerial=aerial,
        combined_covered=combined,
        ground_fraction=ground.coverage_fraction,
        aerial_fraction=aerial.coverage_fraction,
        combined_fraction=combined_fraction,
        residual_ids=residual,
        warning=warning,
    )
