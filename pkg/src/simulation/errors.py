from src.geometry.types import ScanPlanError


class SimulationError(ScanPlanError):
    pass


class EmptyPlan(SimulationError):
    pass


class PipelineStageError(SimulationError):
    """A pipeline stage failed; the original error is chained as ``__cause__``."""

    def __init__(self, iteration: int, stage: str, cause: Exception):
        self.iteration = iteration
        self.stage = stage
        self.cause = cause
        super().__init__(f"iteration {iteration}, stage '{stage}': {type(cause).__name__}: {cause}")
