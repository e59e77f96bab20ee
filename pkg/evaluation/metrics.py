import logging
import math
import warnings
from typing import NamedTuple

import numpy as np

from components.volumes import Mask3D, SurfaceMesh

__all__ = [
    "P2PError",
    "dice",
    "p2p_error",
    "surface_samples",
    "point_triangle_distances",
    "msd",
]

logger = logging.getLogger(__name__)

GOLDEN_RATIO_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0
DISTANCE_CHUNK = 256


class P2PError(NamedTuple):
    mean: float
    max: float
    distances: np.ndarray


def dice(first: Mask3D, second: Mask3D) -> float:
    """
    ``2 |a & b| / (|a| + |b|)``. Undefined when both masks are empty: NaN is returned with a warning.
    """
    first.require_same_grid(second, "dice")
    total = first.count + second.count
    if total == 0:
        warnings.warn("Dice of two empty masks is undefined")
        return math.nan
    return 2.0 * int(np.count_nonzero(first.data & second.data)) / total


def p2p_error(first: SurfaceMesh, second: SurfaceMesh, spacing=(1.0, 1.0, 1.0)) -> P2PError:
    """
    Euclidean distance between homologous vertices in millimeters

    :param first: A mesh in voxel coordinates
    :param second: A mesh homologous to ``first``
    :param spacing: Voxel size in millimeters along each axis
    :return: The mean and max distance and the per-vertex distances
    """
    if first.vertex_count != second.vertex_count:
        raise ValueError(f"Meshes are not homologous: {first.vertex_count} vs {second.vertex_count} vertices")
    if first.vertex_count == 0:
        raise ValueError("Point-to-point error of empty meshes is undefined")
    scale = np.asarray(spacing, dtype=np.float64)
    distances = np.linalg.norm((first.vertices - second.vertices) * scale, axis=1)
    return P2PError(mean=float(distances.mean()), max=float(distances.max()), distances=distances)


def _scaled_corners(mesh: SurfaceMesh, spacing) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vertices = mesh.vertices * np.asarray(spacing, dtype=np.float64)
    return vertices[mesh.triangles[:, 0]], vertices[mesh.triangles[:, 1]], vertices[mesh.triangles[:, 2]]


def surface_samples(mesh: SurfaceMesh, spacing=(1.0, 1.0, 1.0), samples_per_triangle: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """
    Deterministic, area-weighted points on every triangle: a low-discrepancy pattern mapped through the
    uniform square-root barycentric parametrization, each point weighted by ``area / samples_per_triangle``.

    :return: Points of shape ``(T * samples_per_triangle, 3)`` in millimeters and their weights
    """
    if samples_per_triangle < 1:
        raise ValueError(f"Samples per triangle must be positive, got {samples_per_triangle}")
    a, b, c = _scaled_corners(mesh, spacing)

    index = np.arange(samples_per_triangle)
    r1 = np.sqrt((index + 0.5) / samples_per_triangle)
    r2 = np.modf(index * GOLDEN_RATIO_FRACTION)[0]
    weights = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)

    points = np.einsum("sk,tkd->tsd", weights, np.stack([a, b, c], axis=1)).reshape(-1, 3)
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    point_weights = np.repeat(areas / samples_per_triangle, samples_per_triangle)
    return points, point_weights


def point_triangle_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    Exact distance from every point to every triangle (closest-point region tests), shape ``(P, T)``
    """
    p = points[:, None, :]
    ab, ac = (b - a)[None], (c - a)[None]
    ap = p - a[None]
    bp = p - b[None]
    cp = p - c[None]

    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        # interior: barycentric projection
        denominator = va + vb + vc
        v = vb / denominator
        w = vc / denominator
        closest = a[None] + v[..., None] * ab + w[..., None] * ac

        # regions from lowest to highest precedence; later matches overwrite earlier ones
        edge_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        closest = np.where(edge_bc[..., None], b[None] + t_bc[..., None] * (c - b)[None], closest)

        edge_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t_ac = d2 / (d2 - d6)
        closest = np.where(edge_ac[..., None], a[None] + t_ac[..., None] * ac, closest)

    closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c[None], closest)

    with np.errstate(divide="ignore", invalid="ignore"):
        edge_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t_ab = d1 / (d1 - d3)
        closest = np.where(edge_ab[..., None], a[None] + t_ab[..., None] * ab, closest)

    closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b[None], closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a[None], closest)

    return np.linalg.norm(p - closest, axis=-1)


def _directed_mean_distance(source: SurfaceMesh, target: SurfaceMesh, spacing, samples_per_triangle: int) -> float:
    points, weights = surface_samples(source, spacing, samples_per_triangle)
    a, b, c = _scaled_corners(target, spacing)
    nearest = np.empty(len(points))
    for start in range(0, len(points), DISTANCE_CHUNK):
        stop = start + DISTANCE_CHUNK
        nearest[start:stop] = point_triangle_distances(points[start:stop], a, b, c).min(axis=1)
    return float(np.sum(weights * nearest) / np.sum(weights))


def msd(first: SurfaceMesh, second: SurfaceMesh, spacing=(1.0, 1.0, 1.0), samples_per_triangle: int = 16) -> float:
    """
    Symmetric mean surface distance in millimeters: the area-weighted mean distance from points sampled on
    each surface to the other surface, averaged over both directions.

    :param first: A mesh in voxel coordinates
    :param second: Another mesh in voxel coordinates (need not be homologous)
    :param spacing: Voxel size in millimeters
    :param samples_per_triangle: Sample points per triangle
    :return: The mean surface distance
    """
    if first.is_empty() or second.is_empty():
        raise ValueError("Mean surface distance needs two non-empty meshes")
    forward = _directed_mean_distance(first, second, spacing, samples_per_triangle)
    backward = _directed_mean_distance(second, first, spacing, samples_per_triangle)
    logger.debug("Directed surface distances %.6f / %.6f", forward, backward)
    return (forward + backward) / 2.0
