import logging
import time
from typing import Optional

from src.geometry.types import PointCloud, TriangleMesh
from src.meshify.cleanup import clean_mesh
from src.meshify.marching_cubes import marching_cubes
from src.meshify.normals import estimate_normals
from src.meshify.signed_field import build_signed_field
from src.utils.config import MeshifyConfig

logger = logging.getLogger(__name__)


def reconstruct(cloud: PointCloud, cfg: Optional[MeshifyConfig] = None) -> TriangleMesh:
    """Cloud to cleaned mesh: normals, signed field, isosurface, cleanup."""
    cfg = cfg or MeshifyConfig()
    start = time.perf_counter()

    oriented = estimate_normals(cloud, cfg.normal_k)
    grid = build_signed_field(oriented, cfg.voxel_size, cfg.truncation, max_nodes=cfg.max_grid_nodes)
    raw = marching_cubes(grid)
    mesh = clean_mesh(raw, cfg.min_component_area)

    logger.info(
        f"Reconstructed {len(mesh)} triangles ({mesh.total_area:.2f} m^2) "
        f"from {len(cloud)} points in {time.perf_counter() - start:.1f}s"
    )
    return mesh
