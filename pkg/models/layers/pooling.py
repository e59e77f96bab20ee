import numpy as np

from models.layers.layer import Layer, Mode

__all__ = [
    "maxpool3d_forward",
    "maxpool3d_backward",
    "MaxPool3d",
]


def _to_windows(features: np.ndarray) -> np.ndarray:
    channels, nx, ny, nz = features.shape
    if nx % 2 or ny % 2 or nz % 2:
        raise RuntimeError(f"Max pooling needs even spatial dims, got {(nx, ny, nz)}; the padding plan should prevent this")
    blocks = features.reshape(channels, nx // 2, 2, ny // 2, 2, nz // 2, 2)
    return blocks.transpose(0, 1, 3, 5, 2, 4, 6).reshape(channels, nx // 2, ny // 2, nz // 2, 8)


def _from_windows(windows: np.ndarray) -> np.ndarray:
    channels, hx, hy, hz, _ = windows.shape
    blocks = windows.reshape(channels, hx, hy, hz, 2, 2, 2).transpose(0, 1, 4, 2, 5, 3, 6)
    return blocks.reshape(channels, hx * 2, hy * 2, hz * 2)


def maxpool3d_forward(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    2x2x2 max pooling with stride 2.

    :return: The pooled volume and the winning index of each window (first index on ties)
    """
    windows = _to_windows(features)
    winners = windows.argmax(axis=-1)
    pooled = np.take_along_axis(windows, winners[..., None], axis=-1)[..., 0]
    return pooled, winners


def maxpool3d_backward(upstream: np.ndarray, winners: np.ndarray) -> np.ndarray:
    windows = np.zeros(upstream.shape + (8,))
    np.put_along_axis(windows, winners[..., None], upstream[..., None], axis=-1)
    return _from_windows(windows)


class MaxPool3d(Layer):
    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        pooled, winners = maxpool3d_forward(features)
        self._cache = winners
        return pooled

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return maxpool3d_backward(upstream, self._require_cache())

    def signature(self) -> tuple[np.ndarray, ...]:
        return () if self._cache is None else (self._cache,)
