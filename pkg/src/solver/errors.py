from src.geometry.types import ScanPlanError


class SolverError(ScanPlanError):
    """Viewpoint selection could not produce a plan."""
    pass


class NoProgress(SolverError):
    pass


class Infeasible(SolverError):
    pass


class TooLarge(SolverError):
    pass


class MissingPrior(SolverError):
    pass
