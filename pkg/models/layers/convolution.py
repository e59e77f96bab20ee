import numpy as np

from components.errors import DimensionMismatchError
from models.layers.layer import Layer, Mode
from models.network_params import NetworkParams

__all__ = [
    "conv3d_forward",
    "conv3d_backward",
    "Conv3d",
]


def _kernel_offsets(kernel_size: int):
    for dx in range(kernel_size):
        for dy in range(kernel_size):
            for dz in range(kernel_size):
                yield dx, dy, dz


def _check_shapes(features: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> None:
    if kernel.ndim != 5 or len(set(kernel.shape[2:])) != 1 or kernel.shape[2] % 2 == 0:
        raise ValueError(f"Kernel must have shape (out, in, k, k, k) with odd k, got {kernel.shape}")
    if features.ndim != 4 or features.shape[0] != kernel.shape[1]:
        raise DimensionMismatchError("Input channels do not match the kernel", (kernel.shape[1],), features.shape[:1])
    if bias.shape != (kernel.shape[0],):
        raise DimensionMismatchError("Bias does not match the kernel output channels", (kernel.shape[0],), bias.shape)


def conv3d_forward(features: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    Same-size 3D cross-correlation with zero padding.

    :param features: Input of shape ``(in, nx, ny, nz)``
    :param kernel: Weights of shape ``(out, in, k, k, k)``, ``k`` odd
    :param bias: Bias of shape ``(out,)``
    :return: Output of shape ``(out, nx, ny, nz)``
    """
    _check_shapes(features, kernel, bias)
    kernel_size = kernel.shape[2]
    pad = kernel_size // 2
    _, nx, ny, nz = features.shape
    padded = np.pad(features, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))

    output = np.zeros((kernel.shape[0], nx, ny, nz))
    for dx, dy, dz in _kernel_offsets(kernel_size):
        window = padded[:, dx:dx + nx, dy:dy + ny, dz:dz + nz]
        output += np.tensordot(kernel[:, :, dx, dy, dz], window, axes=([1], [0]))
    output += bias[:, None, None, None]
    return output


def conv3d_backward(
        upstream: np.ndarray,
        features: np.ndarray,
        kernel: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of :func:`conv3d_forward` with respect to its input, kernel and bias

    :param upstream: Gradient with respect to the output, shape ``(out, nx, ny, nz)``
    :param features: The forward input
    :param kernel: The forward kernel
    :return: ``(d_features, d_kernel, d_bias)``
    """
    kernel_size = kernel.shape[2]
    pad = kernel_size // 2
    _, nx, ny, nz = features.shape
    padded = np.pad(features, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))

    d_bias = upstream.sum(axis=(1, 2, 3))
    d_kernel = np.zeros_like(kernel)
    d_padded = np.zeros_like(padded)
    for dx, dy, dz in _kernel_offsets(kernel_size):
        window = (slice(None), slice(dx, dx + nx), slice(dy, dy + ny), slice(dz, dz + nz))
        d_kernel[:, :, dx, dy, dz] = np.tensordot(upstream, padded[window], axes=([1, 2, 3], [1, 2, 3]))
        d_padded[window] += np.tensordot(kernel[:, :, dx, dy, dz], upstream, axes=([0], [0]))

    d_features = d_padded[:, pad:pad + nx, pad:pad + ny, pad:pad + nz]
    return d_features, d_kernel, d_bias


class Conv3d(Layer):
    def __init__(
            self,
            name: str,
            in_channels: int,
            out_channels: int,
            kernel_size: int,
            params: NetworkParams,
            rng: np.random.Generator,
            init_scale: float | None = None,
    ):
        """
        :param init_scale: If given, weights are drawn from ``N(0, init_scale**2)``; otherwise fan-in scaled uniform
        """
        super().__init__(name)
        self.params = params
        self.kernel_name = f"{name}.kernel"
        self.bias_name = f"{name}.bias"

        shape = (out_channels, in_channels, kernel_size, kernel_size, kernel_size)
        if init_scale is None:
            bound = 1.0 / np.sqrt(in_channels * kernel_size ** 3)
            kernel = rng.uniform(-bound, bound, size=shape)
        else:
            kernel = rng.normal(0.0, 1.0, size=shape) * init_scale
        params.add(self.kernel_name, kernel)
        params.add(self.bias_name, np.zeros(out_channels))

    def forward(self, features: np.ndarray, mode: Mode = Mode.TRAIN) -> np.ndarray:
        self._cache = features
        return conv3d_forward(features, self.params.values[self.kernel_name], self.params.values[self.bias_name])

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        features = self._require_cache()
        d_features, d_kernel, d_bias = conv3d_backward(upstream, features, self.params.values[self.kernel_name])
        self.params.accumulate(self.kernel_name, d_kernel)
        self.params.accumulate(self.bias_name, d_bias)
        return d_features
