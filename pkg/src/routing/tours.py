"""Open-path visiting tours: nearest neighbour construction plus 2-opt."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.geometry.types import Point3
from src.planning.candidates import Viewpoint
from src.planning.errors import EmptyInput, UnknownStart
from src.planning.sensors import AgentClass

logger = logging.getLogger(__name__)

IMPROVEMENT_EPS = 1e-9

IdPoint = Tuple[int, Point3]


@dataclass(frozen=True)
class Tour:
    agent_class: AgentClass
    order: List[int]
    length: float

    def to_dict(self) -> dict:
        return {"class": self.agent_class.value, "order": list(self.order), "length": self.length}


def path_length(order: Sequence[int], coords: Mapping[int, np.ndarray]) -> float:
    if len(order) < 2:
        return 0.0
    pts = np.array([coords[i] for i in order])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _coords(points: Sequence[IdPoint]) -> Dict[int, np.ndarray]:
    return {int(i): np.asarray(p, dtype=np.float64) for i, p in points}


def nn_tour(points: Sequence[IdPoint], start_id: int, agent_class: AgentClass = AgentClass.GROUND) -> Tour:
    """Greedy chain from ``start_id``; equal distances go to the lowest id."""
    if not points:
        raise EmptyInput("cannot build a tour over no points")
    coords = _coords(points)
    if start_id not in coords:
        raise UnknownStart(f"start id {start_id} is not among the tour points")

    ids = np.array(sorted(coords), dtype=np.int64)
    xyz = np.array([coords[i] for i in ids])
    left = np.ones(len(ids), dtype=bool)
    current = int(np.flatnonzero(ids == start_id)[0])
    left[current] = False
    order = [start_id]
    while left.any():
        pool = np.flatnonzero(left)
        d = np.linalg.norm(xyz[pool] - xyz[current], axis=1)
        current = int(pool[np.lexsort((ids[pool], d))[0]])
        left[current] = False
        order.append(int(ids[current]))
    return Tour(agent_class, order, path_length(order, coords))


def best_two_opt_move(order: Sequence[int], coords: Mapping[int, np.ndarray]) -> Optional[Tuple[int, int, float]]:
    """Most improving reversal of ``order[i..j]`` with the start kept fixed.

    Returns (i, j, delta) or None when nothing shortens the path by more than
    IMPROVEMENT_EPS. Equal deltas resolve to the first (i, j) in scan order.
    """
    n = len(order)
    if n < 3:
        return None
    pts = np.array([coords[i] for i in order])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    i, j = np.triu_indices(n, k=1)
    keep = i >= 1
    i, j = i[keep], j[keep]

    delta = dist[i - 1, j] - dist[i - 1, i]
    tail = j < n - 1
    jn = np.where(tail, j + 1, j)
    delta += np.where(tail, dist[i, jn] - dist[j, jn], 0.0)

    k = int(np.argmin(delta))
    if delta[k] < -IMPROVEMENT_EPS:
        return int(i[k]), int(j[k]), float(delta[k])
    return None


def two_opt(tour: Tour, points: Sequence[IdPoint]) -> Tour:
    """Apply best-improvement segment reversals until the path is 2-opt optimal."""
    coords = _coords(points)
    order = list(tour.order)
    moves = 0
    while True:
        move = best_two_opt_move(order, coords)
        if move is None:
            break
        i, j, _ = move
        order[i : j + 1] = order[i : j + 1][::-1]
        moves += 1
    length = path_length(order, coords)
    logger.debug(f"2-opt: {moves} moves, {tour.length:.3f} -> {length:.3f} m")
    return Tour(tour.agent_class, order, length)


def default_depot(agent_class: AgentClass, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Bounding-box min corner for ground robots; drones start above it."""
    if AgentClass(agent_class) is AgentClass.GROUND:
        return np.array(lo, dtype=np.float64)
    return np.array([lo[0], lo[1], hi[2]], dtype=np.float64)


def plan_tours(
    selection: Mapping[AgentClass, Sequence[int]],
    viewpoints: Sequence[Viewpoint],
    depots: Optional[Mapping[AgentClass, Point3]] = None,
    scene_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> List[Tour]:
    """One tour per agent class with a non-empty selection, ground first."""
    by_id = {vp.id: vp for vp in viewpoints}
    depots = depots or {}
    if scene_bounds is None and viewpoints:
        xyz = np.array([vp.position for vp in viewpoints])
        scene_bounds = (xyz.min(axis=0), xyz.max(axis=0))

    tours = []
    for agent_class in (AgentClass.GROUND, AgentClass.AERIAL):
        ids = list(selection.get(agent_class, []))
        if not ids:
            continue
        points = [(i, by_id[i].position) for i in ids]
        if agent_class in depots:
            depot = np.asarray(depots[agent_class], dtype=np.float64)
        else:
            depot = default_depot(agent_class, *scene_bounds)

        sorted_ids = np.array(sorted(ids), dtype=np.int64)
        xyz = np.array([by_id[i].position for i in sorted_ids])
        d = np.linalg.norm(xyz - depot, axis=1)
        start = int(sorted_ids[np.lexsort((sorted_ids, d))[0]])

        first = nn_tour(points, start, agent_class)
        tour = two_opt(first, points)
        logger.info(
            f"{agent_class.value} tour over {len(ids)} viewpoints: "
            f"{first.length:.1f} m nearest-neighbour, {tour.length:.1f} m after 2-opt"
        )
        tours.append(tour)
    return tours
