import numpy as np
from pydantic import BaseModel, ConfigDict, Field

__all__ = [
    "NetworkParams",
]


class NetworkParams(BaseModel):
    """
    Trainable tensors with their gradient and Adam moment buffers, plus non-trainable buffers
    (batch-norm running statistics). Insertion order is the documented layer order used by checkpoints.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: dict[str, np.ndarray] = Field(default_factory=dict)
    grads: dict[str, np.ndarray] = Field(default_factory=dict)
    first_moments: dict[str, np.ndarray] = Field(default_factory=dict)
    second_moments: dict[str, np.ndarray] = Field(default_factory=dict)
    buffers: dict[str, np.ndarray] = Field(default_factory=dict)
    step: int = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.values:
            raise ValueError(f"Parameter '{name}' already registered")
        value = np.array(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.first_moments[name] = np.zeros_like(value)
        self.second_moments[name] = np.zeros_like(value)
        return value

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.buffers:
            raise ValueError(f"Buffer '{name}' already registered")
        self.buffers[name] = np.array(value, dtype=np.float64)
        return self.buffers[name]

    def accumulate(self, name: str, gradient: np.ndarray) -> None:
        self.grads[name] += gradient

    def zero_grad(self) -> None:
        for gradient in self.grads.values():
            gradient.fill(0.0)

    def parameter_count(self) -> int:
        return sum(value.size for value in self.values.values())

    def names(self) -> list[str]:
        return list(self.values)

    def non_finite(self) -> list[str]:
        """
        Names of parameters and buffers holding a NaN or an infinity
        """
        tensors = {**self.values, **self.buffers}
        return [name for name, value in tensors.items() if not np.all(np.isfinite(value))]
