"""Procedural scenes for demos and tests.

All scenes are z-up with the ground at z = 0. Surfaces that only need to be
seen from one side (room walls, the yard) are single-sided, with normals
toward the side a scanner can stand on.
"""

from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from src.geometry.types import TriangleMesh

Vec = Sequence[float]


def rect(origin: Vec, u: Vec, v: Vec) -> TriangleMesh:
    """Parallelogram origin, origin+u, origin+u+v, origin+v; normal along u x v."""
    o, u, v = (np.asarray(a, dtype=np.float64) for a in (origin, u, v))
    return TriangleMesh(np.array([o, o + u, o + u + v, o + v]), [[0, 1, 2], [0, 2, 3]])


def double_sided(mesh: TriangleMesh) -> TriangleMesh:
    return TriangleMesh.concatenate([mesh, flipped(mesh)])


def flipped(mesh: TriangleMesh) -> TriangleMesh:
    return TriangleMesh(mesh.vertices, mesh.triangles[:, [0, 2, 1]])


def floor(lo: Vec, hi: Vec, z: float = 0.0) -> TriangleMesh:
    return rect((lo[0], lo[1], z), (hi[0] - lo[0], 0, 0), (0, hi[1] - lo[1], 0))


def box_solid(lo: Vec = (0, 0, 0), hi: Vec = (1, 1, 1), bottom: bool = True) -> TriangleMesh:
    """Closed axis-aligned box with outward normals (open underneath if ``bottom`` is False)."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    vertices = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    quads = [(4, 5, 6, 7), (0, 1, 5, 4), (3, 7, 6, 2), (0, 4, 7, 3), (1, 2, 6, 5)]
    if bottom:
        quads.append((0, 3, 2, 1))
    triangles = [t for a, b, c, d in quads for t in ((a, b, c), (a, c, d))]
    return TriangleMesh(np.array(vertices, dtype=np.float64), triangles)


def tetrahedron() -> TriangleMesh:
    vertices = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    return TriangleMesh(np.array(vertices, dtype=np.float64), [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)])


def uv_sphere(radius: float = 1.0, center: Vec = (0, 0, 0), n_lat: int = 50, n_lon: int = 100) -> TriangleMesh:
    """Welded, watertight latitude/longitude sphere with outward normals."""
    theta = np.pi * np.arange(1, n_lat) / n_lat
    phi = 2 * np.pi * np.arange(n_lon) / n_lon
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    ring = np.column_stack(
        ((np.sin(th) * np.cos(ph)).ravel(), (np.sin(th) * np.sin(ph)).ravel(), np.cos(th).ravel())
    )
    vertices = np.vstack(([0, 0, 1], ring, [0, 0, -1])) * radius + np.asarray(center, dtype=np.float64)
    top, bottom = 0, len(vertices) - 1

    def at(i: int, j: int) -> int:
        return 1 + i * n_lon + (j % n_lon)

    triangles = []
    for j in range(n_lon):
        triangles.append((top, at(0, j), at(0, j + 1)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            triangles.append((at(i, j), at(i + 1, j), at(i + 1, j + 1)))
            triangles.append((at(i, j), at(i + 1, j + 1), at(i, j + 1)))
    for j in range(n_lon):
        triangles.append((bottom, at(n_lat - 2, j + 1), at(n_lat - 2, j)))
    return TriangleMesh(vertices, triangles)


def prism(center: Vec, radius: float, height: float, sides: int = 24) -> TriangleMesh:
    """Upright polygonal column with outward sides and a top cap, no bottom."""
    cx, cy = center[0], center[1]
    ang = 2 * np.pi * np.arange(sides) / sides
    ring = np.column_stack((cx + radius * np.cos(ang), cy + radius * np.sin(ang)))
    bottom = np.column_stack((ring, np.zeros(sides)))
    top = np.column_stack((ring, np.full(sides, height)))
    vertices = np.vstack((bottom, top, [[cx, cy, height]]))
    apex = 2 * sides
    triangles = []
    for j in range(sides):
        k = (j + 1) % sides
        triangles += [(j, k, sides + k), (j, sides + k, sides + j), (apex, sides + j, sides + k)]
    return TriangleMesh(vertices, triangles)


def flat_site(size: float = 10.0) -> TriangleMesh:
    return floor((0, 0), (size, size))


def room_shell(size: Vec = (10.0, 8.0, 3.0)) -> TriangleMesh:
    """Closed room whose faces point inward."""
    return flipped(box_solid((0, 0, 0), size))


def partitioned_room(
    size: Vec = (10.0, 6.0, 3.0),
    partition_x: float = 5.0,
    door: Tuple[float, float] = (2.5, 3.5),
    door_height: float = 2.1,
) -> TriangleMesh:
    """Room split by a full-height, zero-thickness wall with one doorway."""
    _, width, height = size
    y0, y1 = door
    pieces = [
        rect((partition_x, 0, 0), (0, y0, 0), (0, 0, height)),
        rect((partition_x, y1, 0), (0, width - y1, 0), (0, 0, height)),
        rect((partition_x, y0, door_height), (0, y1 - y0, 0), (0, 0, height - door_height)),
    ]
    return TriangleMesh.concatenate([room_shell(size)] + [double_sided(p) for p in pieces])


def yard_ring(lo: Vec, hi: Vec, margin: float) -> TriangleMesh:
    """Ground around the footprint [lo, hi], extending ``margin`` on every side."""
    (x0, y0), (x1, y1) = lo, hi
    a, b = x0 - margin, x1 + margin
    return TriangleMesh.concatenate([
        floor((a, y0 - margin), (b, y0)),
        floor((a, y1), (b, y1 + margin)),
        floor((a, y0), (x0, y1)),
        floor((x1, y0), (b, y1)),
    ])


def box_building(size: Vec = (6.0, 6.0, 4.0), yard: float = 4.0) -> TriangleMesh:
    """Closed box building standing in an open yard."""
    w, d, h = size
    return TriangleMesh.concatenate([box_solid((0, 0, 0), (w, d, h), bottom=False), yard_ring((0, 0), (w, d), yard)])


def courtyard(size: float = 12.0, wall_height: float = 4.0, column: float = 1.0, column_height: float = 3.0) -> TriangleMesh:
    """Walled square courtyard with a square column in the middle."""
    L, h = size, wall_height
    lo = (L - column) / 2
    hi = lo + column
    walls = [
        rect((0, 0, 0), (0, 0, h), (L, 0, 0)),
        rect((0, L, 0), (L, 0, 0), (0, 0, h)),
        rect((0, 0, 0), (0, L, 0), (0, 0, h)),
        rect((L, 0, 0), (0, 0, h), (0, L, 0)),
    ]
    ground = TriangleMesh.concatenate([
        floor((0, 0), (L, lo)),
        floor((0, hi), (L, L)),
        floor((0, lo), (lo, hi)),
        floor((hi, lo), (L, hi)),
    ])
    pillar = box_solid((lo, lo, 0), (hi, hi, column_height), bottom=False)
    return TriangleMesh.concatenate([ground, pillar] + walls)


def column_on_floor(size: float = 10.0, radius: float = 1.0, height: float = 3.0, sides: int = 32) -> TriangleMesh:
    return TriangleMesh.concatenate([flat_site(size), prism((size / 2, size / 2), radius, height, sides)])


SCENES: Dict[str, Callable[[], TriangleMesh]] = {
    "room": room_shell,
    "partitioned-room": partitioned_room,
    "box-building": box_building,
    "courtyard": courtyard,
    "column": column_on_floor,
    "flat": flat_site,
    "sphere": uv_sphere,
    "tetrahedron": tetrahedron,
}


def make_scene(name: str) -> TriangleMesh:
    try:
        return SCENES[name]()
    except KeyError:
        raise KeyError(f"unknown scene '{name}', choose from {', '.join(sorted(SCENES))}")
