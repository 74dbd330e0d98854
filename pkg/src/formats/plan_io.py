"""ScanPlan: the persisted, repeatable output of a planning run.

Schema (top-level keys, in this order)::

    meta          {"tool": str, "version": str}
    config_hash   md5 hex digest of the run configuration
    seed          int
    selections    {"ground": [record...], "aerial": [record...]}
                  record = {"id", "position": [x, y, z], "class", "marginal_gain"}
    tours         {"ground": {"order": [...], "length"}, "aerial": {...}}
    coverage      {"planned_fraction", "ground_fraction", "aerial_fraction",
                   "residual_ids": [...], "warning": str | null}

Floats are rounded to 9 significant digits when the plan is built, so a plan
read back compares equal to the one written and equal plans serialize to
identical bytes.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from src import __version__
from src.formats.errors import FormatError, SchemaError
from src.formats.files import atomic_write_text
from src.planning.candidates import Viewpoint
from src.planning.sensors import AgentClass
from src.routing.tours import Tour
from src.solver.two_phase import TwoPhaseSelection

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ("meta", "config_hash", "seed", "selections", "tours", "coverage")
CLASS_KEYS = {AgentClass.GROUND: "ground", AgentClass.AERIAL: "aerial"}


def q(x: float) -> float:
    """Round to 9 significant digits."""
    return float(f"{float(x):.9g}")


@dataclass(frozen=True)
class ViewpointRecord:
    id: int
    position: Tuple[float, float, float]
    agent_class: AgentClass
    marginal_gain: float

    def to_viewpoint(self) -> Viewpoint:
        return Viewpoint(self.id, self.position, self.agent_class)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "position": list(self.position),
            "class": self.agent_class.value,
            "marginal_gain": self.marginal_gain,
        }


@dataclass
class ScanPlan:
    config_hash: str
    seed: int
    selections: Dict[str, List[ViewpointRecord]] = field(
        default_factory=lambda: {"ground": [], "aerial": []}
    )
    tours: Dict[str, Tour] = field(default_factory=dict)
    planned_fraction: float = 0.0
    ground_fraction: float = 0.0
    aerial_fraction: float = 0.0
    residual_ids: List[int] = field(default_factory=list)
    warning: Optional[str] = None
    meta: Dict[str, str] = field(default_factory=lambda: {"tool": "scanplan", "version": __version__})

    def viewpoints(self) -> List[Viewpoint]:
        """Planned viewpoints, ground first, each class in pick order."""
        return [r.to_viewpoint() for key in ("ground", "aerial") for r in self.selections[key]]

    def selected_ids(self, agent_class: AgentClass) -> List[int]:
        return [r.id for r in self.selections[CLASS_KEYS[AgentClass(agent_class)]]]

    def to_dict(self) -> Dict[str, Any]:
        empty = {"order": [], "length": 0.0}
        return {
            "meta": dict(self.meta),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "selections": {k: [r.to_dict() for r in self.selections[k]] for k in ("ground", "aerial")},
            "tours": {
                k: ({"order": list(self.tours[k].order), "length": self.tours[k].length} if k in self.tours else empty)
                for k in ("ground", "aerial")
            },
            "coverage": {
                "planned_fraction": self.planned_fraction,
                "ground_fraction": self.ground_fraction,
                "aerial_fraction": self.aerial_fraction,
                "residual_ids": list(self.residual_ids),
                "warning": self.warning,
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScanPlan":
        if not isinstance(data, dict):
            raise SchemaError("<root>", "plan must be a JSON object")
        for key in TOP_LEVEL_KEYS:
            if key not in data:
                raise SchemaError(key, "missing")
        unknown = set(data) - set(TOP_LEVEL_KEYS)
        if unknown:
            raise SchemaError(sorted(unknown)[0], "unknown key")

        meta = _expect(data, "meta", dict, "meta")
        selections = _expect(data, "selections", dict, "selections")
        tours = _expect(data, "tours", dict, "tours")
        coverage = _expect(data, "coverage", dict, "coverage")

        records = {}
        for key, agent_class in (("ground", AgentClass.GROUND), ("aerial", AgentClass.AERIAL)):
            items = _expect(selections, key, list, f"selections.{key}")
            records[key] = [_record(item, agent_class, f"selections.{key}[{i}]") for i, item in enumerate(items)]

        parsed_tours = {}
        for key, agent_class in (("ground", AgentClass.GROUND), ("aerial", AgentClass.AERIAL)):
            tour = _expect(tours, key, dict, f"tours.{key}")
            order = [int(i) for i in _expect(tour, "order", list, f"tours.{key}.order")]
            length = _number(tour, "length", f"tours.{key}.length")
            if sorted(order) != sorted(r.id for r in records[key]):
                raise SchemaError(f"tours.{key}.order", "does not match the selected viewpoint ids")
            if order:
                parsed_tours[key] = Tour(agent_class, order, length)

        warning = coverage.get("warning")
        if warning is not None and not isinstance(warning, str):
            raise SchemaError("coverage.warning", "must be a string or null")
        seed = data["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise SchemaError("seed", "must be an integer")
        config_hash = data["config_hash"]
        if not isinstance(config_hash, str):
            raise SchemaError("config_hash", "must be a string")

        return cls(
            config_hash=config_hash,
            seed=seed,
            selections=records,
            tours=parsed_tours,
            planned_fraction=_number(coverage, "planned_fraction", "coverage.planned_fraction"),
            ground_fraction=_number(coverage, "ground_fraction", "coverage.ground_fraction"),
            aerial_fraction=_number(coverage, "aerial_fraction", "coverage.aerial_fraction"),
            residual_ids=[int(i) for i in _expect(coverage, "residual_ids", list, "coverage.residual_ids")],
            warning=warning,
            meta={str(k): str(v) for k, v in meta.items()},
        )


def _expect(container: Dict[str, Any], key: str, kind: type, path: str):
    if key not in container:
        raise SchemaError(path, "missing")
    value = container[key]
    if not isinstance(value, kind):
        raise SchemaError(path, f"expected {kind.__name__}")
    return value


def _number(container: Dict[str, Any], key: str, path: str) -> float:
    if key not in container:
        raise SchemaError(path, "missing")
    value = container[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "expected a number")
    return float(value)


def _record(item: Any, agent_class: AgentClass, path: str) -> ViewpointRecord:
    if not isinstance(item, dict):
        raise SchemaError(path, "expected an object")
    position = _expect(item, "position", list, f"{path}.position")
    if len(position) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in position):
        raise SchemaError(f"{path}.position", "expected three numbers")
    if item.get("class") != agent_class.value:
        raise SchemaError(f"{path}.class", f"expected {agent_class.value}")
    vp_id = item.get("id")
    if not isinstance(vp_id, int) or isinstance(vp_id, bool):
        raise SchemaError(f"{path}.id", "must be an integer")
    return ViewpointRecord(
        id=vp_id,
        position=tuple(float(v) for v in position),
        agent_class=agent_class,
        marginal_gain=_number(item, "marginal_gain", f"{path}.marginal_gain"),
    )


def build_plan(
    selection: TwoPhaseSelection,
    viewpoints: Sequence[Viewpoint],
    tours: Sequence[Tour],
    config_hash: str,
    seed: int,
) -> ScanPlan:
    by_id = {vp.id: vp for vp in viewpoints}
    records = {}
    for key, chosen in (("ground", selection.ground), ("aerial", selection.aerial)):
        records[key] = [
            ViewpointRecord(
                id=vp_id,
                position=tuple(q(c) for c in by_id[vp_id].position),
                agent_class=by_id[vp_id].agent_class,
                marginal_gain=q(gain),
            )
            for vp_id, gain in chosen.picks
        ]
    return ScanPlan(
        config_hash=config_hash,
        seed=seed,
        selections=records,
        tours={CLASS_KEYS[t.agent_class]: Tour(t.agent_class, list(t.order), q(t.length)) for t in tours},
        planned_fraction=q(selection.combined_fraction),
        ground_fraction=q(selection.ground_fraction),
        aerial_fraction=q(selection.aerial_fraction),
        residual_ids=list(selection.residual_ids),
        warning=selection.warning,
    )


def dumps_plan(plan: ScanPlan) -> str:
    return json.dumps(plan.to_dict(), indent=2) + "\n"


def save_plan(plan: ScanPlan, path: Union[str, Path]) -> Path:
    path = atomic_write_text(path, dumps_plan(plan))
    logger.info(f"Saved plan ({len(plan.viewpoints())} viewpoints) to {path}")
    return path


def load_plan(path: Union[str, Path], expected_config_hash: Optional[str] = None) -> ScanPlan:
    """Read a plan; with ``expected_config_hash`` a mismatch raises SchemaError."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise FormatError(f"plan file not found: {path}")
    except json.JSONDecodeError as e:
        raise SchemaError("<root>", f"not valid JSON: {e}")
    plan = ScanPlan.from_dict(data)
    if expected_config_hash is not None and plan.config_hash != expected_config_hash:
        raise SchemaError("config_hash", f"{plan.config_hash} does not match {expected_config_hash}")
    return plan
