"""Errors raised while turning point clouds into meshes."""

from src.geometry.types import ScanPlanError


class MeshifyError(ScanPlanError):
    pass


class TooFewPoints(MeshifyError):
    pass


class GridTooLarge(MeshifyError):
    pass


class AllRemoved(MeshifyError):
    pass
