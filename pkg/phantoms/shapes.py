import numpy as np

from phantoms.spec import EllipsoidSpec

__all__ = [
    "icosphere",
    "ellipsoid_quadratic",
    "inside_shape",
    "radial_surface",
]

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = np.array([
    [-1.0, _GOLDEN, 0.0], [1.0, _GOLDEN, 0.0], [-1.0, -_GOLDEN, 0.0], [1.0, -_GOLDEN, 0.0],
    [0.0, -1.0, _GOLDEN], [0.0, 1.0, _GOLDEN], [0.0, -1.0, -_GOLDEN], [0.0, 1.0, -_GOLDEN],
    [_GOLDEN, 0.0, -1.0], [_GOLDEN, 0.0, 1.0], [-_GOLDEN, 0.0, -1.0], [-_GOLDEN, 0.0, 1.0],
])

# Counter-clockwise seen from outside
_ICOSAHEDRON_TRIANGLES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere(subdivisions: int) -> tuple[np.ndarray, np.ndarray]:
    """
    A unit sphere triangulated by repeated midpoint subdivision of an icosahedron.
    The vertex order is fixed for a given level: ``10 * 4**level + 2`` vertices.

    :param subdivisions: The subdivision level
    :return: Unit vertices ``(V, 3)`` and triangles ``(T, 3)``
    """
    if subdivisions < 0:
        raise ValueError(f"Subdivision level must be non-negative, got {subdivisions}")
    vertices = [vertex / np.linalg.norm(vertex) for vertex in _ICOSAHEDRON_VERTICES]
    triangles = list(_ICOSAHEDRON_TRIANGLES)

    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(first: int, second: int) -> int:
            key = (min(first, second), max(first, second))
            if key not in midpoints:
                middle = vertices[first] + vertices[second]
                vertices.append(middle / np.linalg.norm(middle))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in triangles:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        triangles = refined

    return np.array(vertices), np.array(triangles, dtype=np.int64)


def ellipsoid_quadratic(points: np.ndarray, center: np.ndarray, ellipsoid: EllipsoidSpec) -> np.ndarray:
    """
    ``sum(((p - center - offset) / radii) ** 2)``: below 1 inside, 1 on the surface
    """
    scaled = (points - center - np.array(ellipsoid.offset)) / np.array(ellipsoid.radii)
    return np.sum(scaled * scaled, axis=-1)


def inside_shape(points: np.ndarray, center: np.ndarray, ellipsoids: tuple[EllipsoidSpec, ...]) -> np.ndarray:
    """
    Analytic inside-test of the union of ellipsoids

    :param points: Voxel coordinates of shape ``(..., 3)``
    :param center: The shape center
    :param ellipsoids: The compound shape
    :return: Boolean array of shape ``points.shape[:-1]``
    """
    inside = np.zeros(points.shape[:-1], dtype=np.bool_)
    for ellipsoid in ellipsoids:
        inside |= ellipsoid_quadratic(points, center, ellipsoid) < 1.0
    return inside


def radial_surface(directions: np.ndarray, center: np.ndarray, ellipsoids: tuple[EllipsoidSpec, ...]) -> np.ndarray:
    """
    Project unit directions from the shape center onto the surface of the union of ellipsoids.

    Every ellipsoid contains the center, so each ray leaves ellipsoid ``k`` exactly once at ``t_k`` and the
    union's boundary along the ray is at ``max_k t_k``.

    :param directions: Unit vectors ``(V, 3)``
    :param center: The shape center
    :param ellipsoids: The compound shape
    :return: Surface points ``(V, 3)``
    """
    exits = np.zeros(len(directions))
    for ellipsoid in ellipsoids:
        radii = np.array(ellipsoid.radii)
        offset = np.array(ellipsoid.offset)
        # |(t d - o) / r|^2 = 1  <=>  a t^2 - 2 b t + c = 0 with c < 0
        a = np.sum((directions / radii) ** 2, axis=1)
        b = directions @ (offset / radii ** 2)
        c = np.sum((offset / radii) ** 2) - 1.0
        exits = np.maximum(exits, (b + np.sqrt(b * b - a * c)) / a)
    return center + exits[:, None] * directions
