import numpy as np

from models.layers.layer import Layer, Mode

__all__ = [
    "leaky_relu_forward",
    "leaky_relu_backward",
    "LeakyReLU",
]


def leaky_relu_forward(features: np.ndarray, negative_slope: float = 0.2) -> np.ndarray:
    return np.where(features > 0.0, features, negative_slope * features)


def leaky_relu_backward(upstream: np.ndarray, features: np.ndarray, negative_slope: float = 0.2) -> np.ndarray:
    return np.where(features > 0.0, upstream, negative_slope * upstream)


class LeakyReLU(Layer):
    def __init__(self, name: str, negative_slope: float = 0.2):
        super().__init__(name)
        self.negative_slope = negative_slope

    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        self._cache = features
        return leaky_relu_forward(features, self.negative_slope)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return leaky_relu_backward(upstream, self._require_cache(), self.negative_slope)

    def signature(self) -> tuple[np.ndarray, ...]:
        return () if self._cache is None else (self._cache > 0.0,)
