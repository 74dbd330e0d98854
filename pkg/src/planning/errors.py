from src.geometry.types import ScanPlanError


class PlanningError(ScanPlanError):
    """Candidate generation or visibility failed."""
    pass


class NoGroundFound(PlanningError):
    pass


class EmptyInput(PlanningError):
    pass


class UnknownStart(PlanningError):
    pass
