from typing import NamedTuple

import numpy as np

from components.volumes import Volume3D

__all__ = [
    "NccResult",
    "NccLoss",
    "ncc",
    "ncc_loss_and_grad",
]


class NccResult(NamedTuple):
    similarity: float
    degenerate: bool


class NccLoss(NamedTuple):
    loss: float
    gradient: np.ndarray
    degenerate: bool


def _centered(atlas: Volume3D, warped: Volume3D) -> tuple[np.ndarray, np.ndarray]:
    atlas.require_same_grid(warped, "correlation")
    atlas_centered = atlas.data - atlas.data.mean()
    warped_centered = warped.data - warped.data.mean()
    return atlas_centered, warped_centered


def ncc(atlas: Volume3D, warped: Volume3D) -> NccResult:
    """
    Global Pearson correlation over all voxels.
    If either argument is constant the correlation is undefined and 0 is returned with the degenerate flag.

    :param atlas: The atlas volume
    :param warped: The warped patient volume
    :return: The similarity in [-1, 1] and the degenerate flag
    """
    atlas_centered, warped_centered = _centered(atlas, warped)
    denominator = np.sqrt(np.sum(atlas_centered ** 2) * np.sum(warped_centered ** 2))
    if denominator == 0.0:
        return NccResult(similarity=0.0, degenerate=True)
    similarity = float(np.sum(atlas_centered * warped_centered) / denominator)
    return NccResult(similarity=float(np.clip(similarity, -1.0, 1.0)), degenerate=False)


def ncc_loss_and_grad(atlas: Volume3D, warped: Volume3D) -> NccLoss:
    """
    Minimized correlation term ``-ncc`` and its derivative with respect to the warped image
    """
    atlas_centered, warped_centered = _centered(atlas, warped)
    atlas_energy = np.sum(atlas_centered ** 2)
    warped_energy = np.sum(warped_centered ** 2)
    denominator = np.sqrt(atlas_energy * warped_energy)
    if denominator == 0.0:
        return NccLoss(loss=0.0, gradient=np.zeros(warped.dims), degenerate=True)

    similarity = np.sum(atlas_centered * warped_centered) / denominator
    # d(ncc)/dw = a / sqrt(A B) - ncc * b / B, with a, b centered
    gradient = atlas_centered / denominator - similarity * warped_centered / warped_energy
    return NccLoss(loss=float(-similarity), gradient=-gradient, degenerate=False)
