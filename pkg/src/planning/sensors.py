"""Sensor envelopes for the two agent classes."""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple


class AgentClass(str, Enum):
    GROUND = "GROUND"
    AERIAL = "AERIAL"


@dataclass(frozen=True)
class SensorModel:
    """Range, field-of-view and incidence limits of a scanner.

    Angles are degrees; elevations are measured from the horizontal.
    ``angular_resolution`` and ``range_noise_sigma`` only matter to the scan
    simulator.
    """

    min_range: float
    max_range: float
    max_incidence: float
    min_elevation: float
    max_elevation: float
    horizontal_fov: float = 360.0
    angular_resolution: float = 0.5
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0 <= self.min_range < self.max_range:
            raise ValueError(f"need 0 <= min_range < max_range, got {self.min_range}, {self.max_range}")
        if not 0 < self.max_incidence <= 90:
            raise ValueError(f"max_incidence must be in (0, 90], got {self.max_incidence}")
        if not -90 <= self.min_elevation < self.max_elevation <= 90:
            raise ValueError(
                f"need -90 <= min_elevation < max_elevation <= 90, got {self.min_elevation}, {self.max_elevation}"
            )
        if not 0 < self.horizontal_fov <= 360:
            raise ValueError(f"horizontal_fov must be in (0, 360], got {self.horizontal_fov}")
        if self.angular_resolution <= 0:
            raise ValueError("angular_resolution must be positive")
        if self.range_noise_sigma < 0:
            raise ValueError("range_noise_sigma must be >= 0")

    @property
    def vertical_fov(self) -> Tuple[float, float]:
        return self.min_elevation, self.max_elevation

    @property
    def panoramic(self) -> bool:
        return self.horizontal_fov >= 360.0

    @classmethod
    def default_ground(cls) -> "SensorModel":
        """Tripod-style terrestrial scanner carried by the ground robot."""
        return cls(
            min_range=0.6,
            max_range=60.0,
            max_incidence=75.0,
            min_elevation=-60.0,
            max_elevation=90.0,
            angular_resolution=0.5,
            range_noise_sigma=0.005,
        )

    @classmethod
    def default_aerial(cls) -> "SensorModel":
        return cls(
            min_range=2.0,
            max_range=80.0,
            max_incidence=75.0,
            min_elevation=-90.0,
            max_elevation=30.0,
            angular_resolution=0.5,
            range_noise_sigma=0.01,
        )

    @classmethod
    def default_for(cls, agent_class: AgentClass) -> "SensorModel":
        if AgentClass(agent_class) is AgentClass.GROUND:
            return cls.default_ground()
        return cls.default_aerial()
