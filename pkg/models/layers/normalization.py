from typing import NamedTuple

import numpy as np

from models.layers.layer import Layer, Mode
from models.network_params import NetworkParams

__all__ = [
    "BatchNormCache",
    "batchnorm3d_forward",
    "batchnorm3d_backward",
    "BatchNorm3d",
]

_SPATIAL = (1, 2, 3)


class BatchNormCache(NamedTuple):
    normalized: np.ndarray
    inverse_std: np.ndarray
    scale: np.ndarray
    mode: Mode


def _per_channel(values: np.ndarray) -> np.ndarray:
    return values[:, None, None, None]


def batchnorm3d_forward(
        features: np.ndarray,
        scale: np.ndarray,
        shift: np.ndarray,
        running_mean: np.ndarray,
        running_var: np.ndarray,
        mode: Mode = Mode.TRAIN,
        momentum: float = 0.1,
        eps: float = 1e-5,
) -> tuple[np.ndarray, BatchNormCache]:
    """
    Volumetric batch normalization of a single volume: per-channel statistics over all voxels.
    In train mode the batch statistics are used and the running statistics are updated in place;
    in infer mode the running statistics are used.
    """
    if Mode(mode) is Mode.TRAIN:
        mean = features.mean(axis=_SPATIAL)
        variance = features.var(axis=_SPATIAL)
        count = features[0].size
        unbiased = variance * count / (count - 1) if count > 1 else variance
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mean = running_mean
        variance = running_var

    inverse_std = 1.0 / np.sqrt(variance + eps)
    normalized = (features - _per_channel(mean)) * _per_channel(inverse_std)
    output = normalized * _per_channel(scale) + _per_channel(shift)
    return output, BatchNormCache(normalized=normalized, inverse_std=inverse_std, scale=scale, mode=Mode(mode))


def batchnorm3d_backward(upstream: np.ndarray, cache: BatchNormCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    :return: ``(d_features, d_scale, d_shift)``
    """
    d_shift = upstream.sum(axis=_SPATIAL)
    d_scale = (upstream * cache.normalized).sum(axis=_SPATIAL)
    d_normalized = upstream * _per_channel(cache.scale)

    if cache.mode is Mode.INFER:
        return d_normalized * _per_channel(cache.inverse_std), d_scale, d_shift

    count = upstream[0].size
    d_features = _per_channel(cache.inverse_std / count) * (
            count * d_normalized
            - _per_channel(d_normalized.sum(axis=_SPATIAL))
            - cache.normalized * _per_channel((d_normalized * cache.normalized).sum(axis=_SPATIAL))
    )
    return d_features, d_scale, d_shift


class BatchNorm3d(Layer):
    def __init__(self, name: str, channels: int, params: NetworkParams, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__(name)
        self.params = params
        self.momentum = momentum
        self.eps = eps
        self.scale_name = f"{name}.scale"
        self.shift_name = f"{name}.shift"
        self.mean_name = f"{name}.running_mean"
        self.var_name = f"{name}.running_var"

        params.add(self.scale_name, np.ones(channels))
        params.add(self.shift_name, np.zeros(channels))
        params.add_buffer(self.mean_name, np.zeros(channels))
        params.add_buffer(self.var_name, np.ones(channels))

    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        output, self._cache = batchnorm3d_forward(
            features,
            self.params.values[self.scale_name],
            self.params.values[self.shift_name],
            self.params.buffers[self.mean_name],
            self.params.buffers[self.var_name],
            mode=mode,
            momentum=self.momentum,
            eps=self.eps,
        )
        return output

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        d_features, d_scale, d_shift = batchnorm3d_backward(upstream, self._require_cache())
        self.params.accumulate(self.scale_name, d_scale)
        self.params.accumulate(self.shift_name, d_shift)
        return d_features
