"""Weighted set cover over a coverage matrix: greedy solver and exact oracle."""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from src.planning.visibility import CoverageMatrix
from src.solver.errors import Infeasible, NoProgress, TooLarge
from src.solver.weights import validate_weights

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 20


@dataclass
class Selection:
    """Chosen viewpoints in pick order with the weight each one added."""

    picks: List[Tuple[int, float]] = field(default_factory=list)
    covered: Optional[np.ndarray] = None
    coverage_fraction: float = 0.0

    @property
    def ids(self) -> List[int]:
        return [vp_id for vp_id, _ in self.picks]

    @property
    def gains(self) -> List[float]:
        return [gain for _, gain in self.picks]

    def __len__(self) -> int:
        return len(self.picks)

    @classmethod
    def empty(cls, n_samples: int) -> "Selection":
        return cls(covered=np.zeros(n_samples, dtype=bool))


def covered_weight(covered: np.ndarray, weights: np.ndarray) -> float:
    return float(np.where(covered, weights, 0.0).sum())


def _gains(bits: np.ndarray, residual: np.ndarray) -> np.ndarray:
    # Same summation for every row, so equal rows give bit-equal gains.
    return np.where(bits, residual, 0.0).sum(axis=1)


def _argmax_lowest_id(gains: np.ndarray, ids: np.ndarray) -> int:
    # Only exactly equal gains tie; a larger gain always wins, however small the margin.
    tied = np.flatnonzero(gains == gains.max())
    return int(tied[np.argmin(ids[tied])])


def greedy_select(
    matrix: CoverageMatrix,
    weights: np.ndarray,
    target_coverage: float = 0.98,
    min_gain: float = 0.05,
    max_views: int = 64,
    baseline: Optional[np.ndarray] = None,
) -> Selection:
    """Pick candidates by largest uncovered weight until a stop rule fires.

    Stops when the covered fraction (counting ``baseline`` as already covered)
    reaches ``target_coverage``, when the best gain falls below ``min_gain``,
    or after ``max_views`` picks. Ties go to the lowest viewpoint id.
    """
    if not 0 < target_coverage <= 1:
        raise ValueError(f"target_coverage must be in (0, 1], got {target_coverage}")
    if min_gain < 0:
        raise ValueError("min_gain must be >= 0")
    weights = validate_weights(weights, len(matrix.samples))
    total = float(weights.sum())
    ids = matrix.ids

    already = np.zeros(len(weights), dtype=bool) if baseline is None else baseline.astype(bool)
    covered = already.copy()
    chosen = np.zeros(len(ids), dtype=bool)
    selection = Selection()

    while len(selection) < max_views and covered_weight(covered, weights) / total < target_coverage:
        gains = _gains(matrix.bits, np.where(covered, 0.0, weights))
        gains[chosen] = -1.0
        row = _argmax_lowest_id(gains, ids)
        gain = float(gains[row])
        if gain <= 0:
            if not selection.picks:
                raise NoProgress("no candidate sees any uncovered weighted sample")
            break
        if gain < min_gain:
            logger.debug(f"Stopping: best gain {gain:.4g} below min_gain {min_gain}")
            break
        chosen[row] = True
        covered |= matrix.bits[row]
        selection.picks.append((int(ids[row]), gain))
        logger.debug(f"Picked viewpoint {ids[row]} gain {gain:.4g}")

    own = matrix.bits[chosen].any(axis=0) if chosen.any() else np.zeros(len(weights), dtype=bool)
    selection.covered = own
    selection.coverage_fraction = covered_weight(own, weights) / total
    logger.info(
        f"Greedy selected {len(selection)} of {len(ids)} candidates, "
        f"coverage {covered_weight(covered, weights) / total:.4f}"
    )
    return selection


def order_by_gain(matrix: CoverageMatrix, weights: np.ndarray, vp_ids: List[int]) -> Selection:
    """Re-run the greedy rule restricted to ``vp_ids`` so gains come out non-increasing."""
    sub = matrix.subset(sorted(vp_ids))
    total = float(weights.sum())
    covered = np.zeros(len(weights), dtype=bool)
    remaining = np.ones(len(sub.candidates), dtype=bool)
    selection = Selection()
    ids = sub.ids
    while remaining.any():
        gains = _gains(sub.bits, np.where(covered, 0.0, weights))
        gains[~remaining] = -1.0
        row = _argmax_lowest_id(gains, ids)
        remaining[row] = False
        covered |= sub.bits[row]
        selection.picks.append((int(ids[row]), float(gains[row])))
    selection.covered = covered
    selection.coverage_fraction = covered_weight(covered, weights) / total
    return selection


def brute_force_cover(matrix: CoverageMatrix, weights: np.ndarray, target_coverage: float) -> Selection:
    """Smallest candidate subset reaching ``target_coverage``, by exhaustive search.

    Subsets are tried by increasing size in lexicographic id order, so the
    first hit is the lexicographically smallest optimum.
    """
    n = len(matrix.candidates)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n} candidates exceeds the exhaustive limit of {BRUTE_FORCE_LIMIT}")
    weights = validate_weights(weights, len(matrix.samples))
    total = float(weights.sum())

    if covered_weight(matrix.bits.any(axis=0), weights) / total < target_coverage:
        raise Infeasible(f"all {n} candidates together stay below target {target_coverage}")

    order = np.argsort(matrix.ids, kind="stable")
    ids = matrix.ids[order]
    bits = matrix.bits[order]
    for size in range(1, n + 1):
        for rows in combinations(range(n), size):
            covered = bits[list(rows)].any(axis=0)
            if covered_weight(covered, weights) / total >= target_coverage:
                logger.debug(f"Exhaustive optimum has {size} viewpoints")
                return order_by_gain(matrix, weights, [int(ids[r]) for r in rows])
    raise Infeasible("no subset reaches the target")
