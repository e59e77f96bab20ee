from abc import ABC, abstractmethod
from enum import StrEnum
from typing import Any

import numpy as np

from components.errors import StateError


class Mode(StrEnum):
    TRAIN = "train"
    INFER = "infer"


class Layer(ABC):
    """
    A differentiable operation on feature volumes of shape ``(channels, nx, ny, nz)``.

    ``forward`` caches what ``backward`` needs; ``backward`` returns the gradient with respect to the input and
    accumulates parameter gradients into the shared parameter store.
    """

    def __init__(self, name: str):
        self.name = name
        self._cache: Any = None

    @abstractmethod
    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, upstream: np.ndarray) -> np.ndarray:
        pass

    def signature(self) -> tuple[np.ndarray, ...]:
        """
        Discrete decisions taken by the last forward pass (activation signs, pooling winners).
        Two passes with equal signatures lie on the same smooth piece of the function.
        """
        return ()

    def _require_cache(self) -> Any:
        if self._cache is None:
            raise StateError(f"Layer '{self.name}' has no cached forward pass")
        return self._cache


class Sequential(Layer):
    def __init__(self, name: str, layers: list[Layer]):
        super().__init__(name)
        self.layers = layers

    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        for layer in self.layers:
            features = layer.forward(features, mode)
        return features

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            upstream = layer.backward(upstream)
        return upstream

    def signature(self) -> tuple[np.ndarray, ...]:
        return tuple(part for layer in self.layers for part in layer.signature())
