"""PLY and OBJ geometry files.

PLY goes through plyfile (ascii and both binary byte orders); OBJ is read by
hand since only ``v`` and ``f`` records matter here.
"""

import io
import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from src.formats.errors import FormatError, ParseError, UnsupportedFeature
from src.formats.files import atomic_write_bytes
from src.geometry.types import GeometryError, PointCloud, TriangleMesh

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ------------------------------------------------------------------ reading


def _parse_failure(path: PathLike, e: Exception) -> ParseError:
    """Re-express a plyfile error, keeping the header line when it has one."""
    element = getattr(e, "element", None)
    if element is not None:
        where = f"element '{element.name}'"
        row = getattr(e, "row", None)
        if row is not None:
            where += f" row {row}"
        return ParseError(f"{path}: {where}: {getattr(e, 'message', e)}")
    return ParseError(f"{path}: {getattr(e, 'message', e)}", getattr(e, "line", None))


def _face_lists(column: np.ndarray):
    """Stack a ragged plyfile list column when every face has the same size."""
    if len(column) == 0:
        return np.empty((0, 3), dtype=np.int64)
    if isinstance(column, np.ndarray) and column.dtype != object:
        return column
    sizes = {len(face) for face in column}
    if len(sizes) == 1:
        return np.vstack(column).astype(np.int64)
    return [list(face) for face in column]


def read_ply(path: PathLike) -> Union[PointCloud, TriangleMesh]:
    try:
        ply = PlyData.read(str(path))
    except PlyParseError as e:
        raise _parse_failure(path, e)
    except (ValueError, EOFError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}")

    names = [element.name for element in ply.elements]
    if "vertex" not in names:
        raise ParseError(f"{path}: PLY has no vertex element")
    vertex = ply["vertex"].data
    fields = vertex.dtype.names or ()
    if not all(k in fields for k in ("x", "y", "z")):
        raise ParseError(f"{path}: PLY vertex element lacks x, y, z")
    points = _optional_triplet(vertex, fields, ("x", "y", "z"))

    try:
        if "face" in names:
            face = ply["face"].data
            face_fields = face.dtype.names or ()
            key = "vertex_indices" if "vertex_indices" in face_fields else "vertex_index"
            if key not in face_fields:
                raise ParseError(f"{path}: face element has no vertex_indices list")
            triangles = fan_triangulate(_face_lists(face[key]))
            logger.debug(f"Read mesh {path}: {len(points)} vertices, {len(triangles)} triangles")
            return TriangleMesh(points, triangles)
        normals = _optional_triplet(vertex, fields, ("nx", "ny", "nz"))
        origins = _optional_triplet(vertex, fields, ("origin_x", "origin_y", "origin_z"))
        logger.debug(f"Read cloud {path}: {len(points)} points")
        return PointCloud(points, normals, origins)
    except GeometryError as e:
        raise ParseError(f"{path}: {e}")


def fan_triangulate(polygons) -> np.ndarray:
    """Split polygons (v0, v1, ..., vk) into triangles (v0, vi, vi+1)."""
    if isinstance(polygons, np.ndarray) and polygons.ndim == 2:
        n = polygons.shape[1]
        if n < 3:
            return np.empty((0, 3), dtype=np.int64)
        fans = [polygons[:, [0, i, i + 1]] for i in range(1, n - 1)]
        return np.stack(fans, axis=1).reshape(-1, 3).astype(np.int64)
    triangles = []
    skipped = 0
    for poly in polygons:
        if len(poly) < 3:
            skipped += 1
            continue
        triangles.extend((poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1))
    if skipped:
        logger.warning(f"Skipped {skipped} faces with fewer than 3 vertices")
    return np.array(triangles, dtype=np.int64).reshape(-1, 3)


def _optional_triplet(vertex: np.ndarray, fields: Sequence[str], names: Sequence[str]) -> Optional[np.ndarray]:
    if all(n in fields for n in names):
        return np.column_stack([np.asarray(vertex[n], dtype=np.float64) for n in names])
    return None


def read_obj(path: PathLike) -> TriangleMesh:
    """Vertices and faces of a Wavefront OBJ; everything else is ignored."""
    vertices: List[Tuple[float, float, float]] = []
    polygons: List[List[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for line_no, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                try:
                    vertices.append((float(tokens[1]), float(tokens[2]), float(tokens[3])))
                except (IndexError, ValueError):
                    raise ParseError("vertex needs three numeric coordinates", line_no)
            elif tokens[0] == "f":
                poly = []
                for ref in tokens[1:]:
                    try:
                        idx = int(ref.split("/")[0])
                    except ValueError:
                        raise ParseError(f"bad face reference '{ref}'", line_no)
                    idx = idx - 1 if idx > 0 else len(vertices) + idx
                    if idx < 0 or idx >= len(vertices):
                        raise ParseError(f"face reference '{ref}' out of range", line_no)
                    poly.append(idx)
                polygons.append(poly)
    triangles = fan_triangulate(polygons)
    logger.debug(f"Read OBJ {path}: {len(vertices)} vertices, {len(triangles)} triangles")
    return TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), triangles)


def load_geometry(path: PathLike, format: Optional[str] = None) -> Union[PointCloud, TriangleMesh]:
    """Read a PLY or OBJ file; the format defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if not path.exists():
        raise FormatError(f"file not found: {path}")
    if fmt == "PLY":
        return read_ply(path)
    if fmt == "OBJ":
        return read_obj(path)
    raise UnsupportedFeature(f"unsupported geometry format '{fmt}'")


def load_mesh(path: PathLike) -> TriangleMesh:
    geometry = load_geometry(path)
    if not isinstance(geometry, TriangleMesh):
        raise FormatError(f"{path} holds a point cloud, expected a mesh")
    return geometry


def load_cloud(path: PathLike) -> PointCloud:
    geometry = load_geometry(path)
    if not isinstance(geometry, PointCloud):
        raise FormatError(f"{path} holds a mesh, expected a point cloud")
    return geometry


# ------------------------------------------------------------------ writing


def write_ply(
    path: PathLike,
    vertex: Mapping[str, np.ndarray],
    faces: Optional[np.ndarray] = None,
    edges: Optional[np.ndarray] = None,
    binary: bool = True,
) -> Path:
    """Write a PLY whose vertex columns are given by name, in mapping order.

    Faces are triangles (``property list uchar int vertex_indices``); edges
    are ``vertex1``/``vertex2`` int pairs.
    """
    columns = {name: np.asarray(values) for name, values in vertex.items()}
    n_vertices = len(next(iter(columns.values()))) if columns else 0
    table = np.empty(n_vertices, dtype=[(name, c.dtype.str[1:]) for name, c in columns.items()])
    for name, c in columns.items():
        table[name] = c
    elements = [PlyElement.describe(table, "vertex")]

    if faces is not None:
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        face_table = np.empty(len(faces), dtype=[("vertex_indices", "i4", (3,))])
        face_table["vertex_indices"] = faces
        elements.append(PlyElement.describe(face_table, "face", len_types={"vertex_indices": "u1"}))
    if edges is not None:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        edge_table = np.empty(len(edges), dtype=[("vertex1", "i4"), ("vertex2", "i4")])
        edge_table["vertex1"] = edges[:, 0]
        edge_table["vertex2"] = edges[:, 1]
        elements.append(PlyElement.describe(edge_table, "edge"))

    ply = PlyData(elements, text=not binary, byte_order="<", comments=["scanplan"])
    buffer = io.BytesIO()
    ply.write(buffer)
    return atomic_write_bytes(path, buffer.getvalue())


def write_cloud_ply(path: PathLike, cloud: PointCloud, binary: bool = True) -> Path:
    vertex = {"x": cloud.points[:, 0], "y": cloud.points[:, 1], "z": cloud.points[:, 2]}
    if cloud.has_normals:
        vertex.update(nx=cloud.normals[:, 0], ny=cloud.normals[:, 1], nz=cloud.normals[:, 2])
    if cloud.has_origins:
        vertex.update(
            origin_x=cloud.origins[:, 0], origin_y=cloud.origins[:, 1], origin_z=cloud.origins[:, 2]
        )
    return write_ply(path, vertex, binary=binary)


def write_mesh_ply(path: PathLike, mesh: TriangleMesh, binary: bool = True) -> Path:
    v = mesh.vertices
    return write_ply(path, {"x": v[:, 0], "y": v[:, 1], "z": v[:, 2]}, faces=mesh.triangles, binary=binary)


def save_geometry(path: PathLike, geometry: Union[PointCloud, TriangleMesh], binary: bool = True) -> Path:
    if isinstance(geometry, TriangleMesh):
        return write_mesh_ply(path, geometry, binary)
    return write_cloud_ply(path, geometry, binary)
