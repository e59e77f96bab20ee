import logging

import numpy as np
from scipy import ndimage

from components.volumes.volume import Mask3D

__all__ = [
    "spherical_structuring_element",
    "dilate_sphere",
    "mask_and",
    "mask_or",
    "mask_not",
    "mask_sub",
]

logger = logging.getLogger(__name__)


def spherical_structuring_element(radius_voxels: float) -> np.ndarray:
    """
    Integer offsets ``d`` with ``||d||_2 <= radius`` (ties included), in voxel units.

    :param radius_voxels: The ball radius in voxels
    :return: A cubic boolean array centered on the origin offset
    """
    if not radius_voxels > 0:
        raise ValueError(f"Dilation radius must be positive, got {radius_voxels}")
    extent = int(np.floor(radius_voxels))
    offsets = np.arange(-extent, extent + 1)
    dx, dy, dz = np.meshgrid(offsets, offsets, offsets, indexing="ij")
    return dx * dx + dy * dy + dz * dz <= radius_voxels * radius_voxels


def dilate_sphere(mask: Mask3D, radius_voxels: float) -> Mask3D:
    """
    Binary dilation by a ball in voxel units; spacing is ignored and the domain boundary clips the element.

    :param mask: The binary mask to dilate
    :param radius_voxels: Ball radius in voxels, must be positive
    :return: The dilated mask on the same grid
    """
    structure = spherical_structuring_element(radius_voxels)
    dilated = ndimage.binary_dilation(mask.data, structure=structure, border_value=0)
    logger.debug("Dilated %d voxels to %d with radius %s", mask.count, int(dilated.sum()), radius_voxels)
    return Mask3D(data=dilated, spacing=mask.spacing)


def mask_and(first: Mask3D, second: Mask3D) -> Mask3D:
    return first & second


def mask_or(first: Mask3D, second: Mask3D) -> Mask3D:
    return first | second


def mask_not(mask: Mask3D) -> Mask3D:
    return ~mask


def mask_sub(first: Mask3D, second: Mask3D) -> Mask3D:
    return first - second
