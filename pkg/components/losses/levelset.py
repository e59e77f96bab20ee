import numpy as np

from components.volumes import Mask3D, Volume3D

__all__ = [
    "levelset_loss",
    "levelset_grad",
]


def _region_coefficients(warped: Volume3D, foreground: Mask3D, band: Mask3D) -> np.ndarray:
    warped.require_same_grid(foreground, "level-set foreground")
    warped.require_same_grid(band, "level-set band")
    band_size = band.count
    if band_size == 0:
        raise ValueError("The band mask is empty; the level-set loss is undefined")
    if not foreground.issubset(band):
        raise ValueError("The band mask must contain the foreground mask")
    # -mu * (2 beta - 1) / sum(mu): -1 inside the foreground, +1 in the band background, 0 elsewhere
    signs = 2.0 * foreground.data - 1.0
    return -(band.data * signs) / band_size


def levelset_loss(warped: Volume3D, foreground: Mask3D, band: Mask3D) -> float:
    """
    Region contrast inside the band: ``-sum(w * mu * (2 beta - 1)) / sum(mu)``.
    Lower values mean brighter foreground relative to the surrounding band.

    :param warped: The warped patient volume
    :param foreground: The atlas structure mask
    :param band: The dilated structure mask, a superset of ``foreground``
    :return: The loss value
    """
    return float(np.sum(warped.data * _region_coefficients(warped, foreground, band)))


def levelset_grad(warped: Volume3D, foreground: Mask3D, band: Mask3D) -> np.ndarray:
    return _region_coefficients(warped, foreground, band)
