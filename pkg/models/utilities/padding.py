from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict

__all__ = [
    "PaddingPlan",
]


class PaddingPlan(BaseModel):
    """
    Symmetric zero padding of each spatial axis up to the next multiple of ``multiple`` (``2 ** pools``),
    so that every pooling stage sees even dims. The low side gets the smaller half.
    """
    model_config = ConfigDict(frozen=True)

    original_dims: tuple[int, int, int]
    padded_dims: tuple[int, int, int]
    low: tuple[int, int, int]
    high: tuple[int, int, int]

    @classmethod
    def for_dims(cls, dims: tuple[int, int, int], multiple: int = 8) -> Self:
        if any(n < 1 for n in dims):
            raise ValueError(f"Dims must be positive, got {dims}")
        padded = tuple(int(-(-n // multiple) * multiple) for n in dims)
        low = tuple((p - n) // 2 for n, p in zip(dims, padded))
        high = tuple(p - n - lo for n, p, lo in zip(dims, padded, low))
        return cls(original_dims=tuple(dims), padded_dims=padded, low=low, high=high)

    def pad(self, array: np.ndarray) -> np.ndarray:
        """
        Zero-pad the three leading spatial axes; trailing axes (channels/components) are left alone
        """
        widths = [(lo, hi) for lo, hi in zip(self.low, self.high)] + [(0, 0)] * (array.ndim - 3)
        return np.pad(array, widths)

    def crop(self, array: np.ndarray) -> np.ndarray:
        window = tuple(slice(lo, lo + n) for lo, n in zip(self.low, self.original_dims))
        return array[window]
