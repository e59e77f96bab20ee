import numpy as np

from components.errors import DimensionMismatchError

__all__ = [
    "concat_skip_forward",
    "concat_skip_backward",
]


def concat_skip_forward(decoder: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """
    Channel concatenation of an upsampled decoder volume and the equal-resolution encoder skip
    """
    if decoder.shape[1:] != skip.shape[1:]:
        raise DimensionMismatchError("Skip connection resolution mismatch", skip.shape[1:], decoder.shape[1:])
    return np.concatenate([decoder, skip], axis=0)


def concat_skip_backward(upstream: np.ndarray, decoder_channels: int) -> tuple[np.ndarray, np.ndarray]:
    return upstream[:decoder_channels], upstream[decoder_channels:]
