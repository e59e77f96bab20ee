from typing import NamedTuple

import numpy as np

__all__ = [
    "TrilinearSample",
    "sample_trilinear",
    "identity_grid",
]


class TrilinearSample(NamedTuple):
    values: np.ndarray
    gradient: np.ndarray | None


def identity_grid(dims: tuple[int, int, int]) -> np.ndarray:
    """
    Voxel coordinates of every grid point, shape ``(nx, ny, nz, 3)``
    """
    axes = [np.arange(n, dtype=np.float64) for n in dims]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def sample_trilinear(
        array: np.ndarray,
        coordinates: np.ndarray,
        with_gradient: bool = False,
) -> TrilinearSample:
    """
    Sample a grid array at continuous voxel coordinates with clamp-to-edge trilinear interpolation.

    :param array: Grid values of shape ``(nx, ny, nz, *channels)``
    :param coordinates: Sample points of shape ``(..., 3)`` in voxel units
    :param with_gradient: Also return the derivative of every sample with respect to its coordinate,
    shape ``values.shape + (3,)``; zero along axes where the coordinate was clamped
    :return: The sampled values and optionally their spatial gradient
    """
    dims = np.array(array.shape[:3])
    channel_dims = array.shape[3:]
    upper = (dims - 1).astype(np.float64)

    clamped = np.clip(coordinates, 0.0, upper)
    lower_index = np.minimum(np.floor(clamped).astype(np.int64), np.maximum(dims - 2, 0))
    fraction = clamped - lower_index
    upper_index = np.minimum(lower_index + 1, dims - 1)

    corner_indices = (lower_index, upper_index)
    corner_weights = (1.0 - fraction, fraction)
    # Extra trailing axes so point weights broadcast over channels
    expand = (Ellipsis,) + (None,) * len(channel_dims)

    values = np.zeros(coordinates.shape[:-1] + channel_dims)
    gradient = np.zeros(values.shape + (3,)) if with_gradient else None
    for bx in (0, 1):
        for by in (0, 1):
            for bz in (0, 1):
                corner = array[
                    corner_indices[bx][..., 0],
                    corner_indices[by][..., 1],
                    corner_indices[bz][..., 2],
                ]
                wx = corner_weights[bx][..., 0]
                wy = corner_weights[by][..., 1]
                wz = corner_weights[bz][..., 2]
                values += (wx * wy * wz)[expand] * corner
                if with_gradient:
                    sx = 1.0 if bx else -1.0
                    sy = 1.0 if by else -1.0
                    sz = 1.0 if bz else -1.0
                    gradient[..., 0] += (sx * wy * wz)[expand] * corner
                    gradient[..., 1] += (wx * sy * wz)[expand] * corner
                    gradient[..., 2] += (wx * wy * sz)[expand] * corner

    if with_gradient:
        clamped_axes = (coordinates < 0.0) | (coordinates > upper)
        clamped_axes = clamped_axes.reshape(coordinates.shape[:-1] + (1,) * len(channel_dims) + (3,))
        gradient[np.broadcast_to(clamped_axes, gradient.shape)] = 0.0
    return TrilinearSample(values=values, gradient=gradient)
