from functools import lru_cache

import numpy as np

from models.layers.layer import Layer, Mode

__all__ = [
    "interpolation_matrix",
    "upsample_trilinear_forward",
    "upsample_trilinear_backward",
    "UpsampleTrilinear",
]


@lru_cache(maxsize=64)
def interpolation_matrix(length: int, factor: int = 2) -> np.ndarray:
    """
    Linear interpolation operator of shape ``(factor * length, length)`` with half-voxel alignment:
    output ``j`` samples the input at ``(j + 0.5) / factor - 0.5``, clamped to the input extent.
    """
    source = np.clip((np.arange(factor * length) + 0.5) / factor - 0.5, 0.0, length - 1)
    lower = np.minimum(np.floor(source).astype(np.int64), max(length - 2, 0))
    fraction = source - lower
    upper = np.minimum(lower + 1, length - 1)

    matrix = np.zeros((factor * length, length))
    rows = np.arange(factor * length)
    np.add.at(matrix, (rows, lower), 1.0 - fraction)
    np.add.at(matrix, (rows, upper), fraction)
    matrix.flags.writeable = False
    return matrix


def _apply_separable(features: np.ndarray, matrices: list[np.ndarray]) -> np.ndarray:
    for axis, matrix in enumerate(matrices, start=1):
        features = np.moveaxis(np.tensordot(matrix, features, axes=([1], [axis])), 0, axis)
    return features


def upsample_trilinear_forward(features: np.ndarray, factor: int = 2) -> np.ndarray:
    return _apply_separable(features, [interpolation_matrix(n, factor) for n in features.shape[1:]])


def upsample_trilinear_backward(upstream: np.ndarray, factor: int = 2) -> np.ndarray:
    return _apply_separable(upstream, [interpolation_matrix(n // factor, factor).T for n in upstream.shape[1:]])


class UpsampleTrilinear(Layer):
    def __init__(self, name: str, factor: int = 2):
        super().__init__(name)
        self.factor = factor

    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        self._cache = features.shape
        return upsample_trilinear_forward(features, self.factor)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        self._require_cache()
        return upsample_trilinear_backward(upstream, self.factor)
