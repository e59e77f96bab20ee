"""
Single-input 3D encoder-decoder producing a displacement field.

Encoder: eight convolution blocks (conv, optional volumetric batch norm, leaky rectification) with a
max pooling after each block listed in ``pool_after``; the output of that block is kept as the skip.
Decoder: three stages of trilinear upsampling, skip concatenation and ``decoder_convs`` convolution
blocks, then a final convolution to three channels. With the defaults this is ten decoder layers.
"""
import hashlib
import logging
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from components.errors import DimensionMismatchError, NonFiniteLossError, StateError
from components.volumes import DisplacementField, Volume3D
from models.layers import (
    BatchNorm3d,
    Conv3d,
    LeakyReLU,
    MaxPool3d,
    Mode,
    Sequential,
    UpsampleTrilinear,
    concat_skip_backward,
    concat_skip_forward,
)
from models.network_params import NetworkParams
from models.utilities.padding import PaddingPlan

__all__ = [
    "NetConfig",
    "UNet3D",
]

logger = logging.getLogger(__name__)

ENCODER_CONVS = 8
POOL_COUNT = 3


class NetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    input_dims: tuple[int, int, int] = (64, 76, 44)
    base_channels: int = Field(default=16, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    negative_slope: float = Field(default=0.2, ge=0.0)
    pool_after: tuple[int, int, int] = (1, 3, 5)
    encoder_batchnorm: tuple[bool, ...] = (True,) * ENCODER_CONVS
    decoder_convs: tuple[int, int, int] = (3, 3, 3)
    final_init_scale: float = Field(default=1e-5, ge=0.0)
    batchnorm_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    batchnorm_eps: float = Field(default=1e-5, ge=0.0)
    seed: int = 0

    @field_validator("kernel_size")
    @classmethod
    def validate_kernel_size(cls, kernel_size: int) -> int:
        if kernel_size % 2 == 0:
            raise ValueError(f"Kernel size must be odd, got {kernel_size}")
        return kernel_size

    @field_validator("pool_after")
    @classmethod
    def validate_pool_after(cls, pool_after: tuple[int, int, int]) -> tuple[int, int, int]:
        if list(pool_after) != sorted(set(pool_after)) or pool_after[0] < 0 or pool_after[-1] >= ENCODER_CONVS - 1:
            raise ValueError(f"Pool positions must be strictly increasing encoder indices below {ENCODER_CONVS - 1}")
        return pool_after

    @field_validator("encoder_batchnorm")
    @classmethod
    def validate_encoder_batchnorm(cls, mask: tuple[bool, ...]) -> tuple[bool, ...]:
        if len(mask) != ENCODER_CONVS:
            raise ValueError(f"The batch-norm mask needs {ENCODER_CONVS} entries, got {len(mask)}")
        return mask

    @model_validator(mode="after")
    def validate_decoder(self) -> Self:
        if min(self.decoder_convs) < 1:
            raise ValueError("Every decoder stage needs at least one convolution")
        return self

    @property
    def encoder_channels(self) -> list[int]:
        channels = []
        level = 0
        for index in range(ENCODER_CONVS):
            channels.append(self.base_channels * 2 ** level)
            if index in self.pool_after:
                level += 1
        return channels

    @property
    def skip_channels(self) -> list[int]:
        return [self.encoder_channels[index] for index in self.pool_after]

    def parameter_count(self) -> int:
        """
        Trainable parameters: ``k^3 * c_in * c_out + c_out`` per convolution plus two per normalized channel
        """
        volume = self.kernel_size ** 3
        total = 0
        in_channels = 1
        for out_channels, normalized in zip(self.encoder_channels, self.encoder_batchnorm):
            total += volume * in_channels * out_channels + out_channels
            total += 2 * out_channels if normalized else 0
            in_channels = out_channels
        for skip, count in zip(reversed(self.skip_channels), self.decoder_convs):
            channels = [in_channels + skip] + [skip] * count
            total += sum(volume * c_in * c_out + c_out for c_in, c_out in zip(channels, channels[1:]))
            in_channels = skip
        total += volume * in_channels * 3 + 3
        return total

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class UNet3D:
    def __init__(self, config: NetConfig, params: NetworkParams | None = None):
        """
        :param config: The architecture
        :param params: Existing parameters to adopt (e.g. from a checkpoint); freshly initialized if omitted
        """
        self.config = config
        rng = np.random.default_rng(config.seed)
        fresh = NetworkParams()

        self.encoder: list[Sequential] = []
        self.pools: list[MaxPool3d] = []
        in_channels = 1
        for index, (out_channels, normalized) in enumerate(zip(config.encoder_channels, config.encoder_batchnorm)):
            layers = [Conv3d(f"encoder{index}.conv", in_channels, out_channels, config.kernel_size, fresh, rng)]
            if normalized:
                layers.append(BatchNorm3d(
                    f"encoder{index}.norm", out_channels, fresh,
                    momentum=config.batchnorm_momentum, eps=config.batchnorm_eps,
                ))
            layers.append(LeakyReLU(f"encoder{index}.act", config.negative_slope))
            self.encoder.append(Sequential(f"encoder{index}", layers))
            if index in config.pool_after:
                self.pools.append(MaxPool3d(f"pool{len(self.pools)}"))
            in_channels = out_channels

        self.upsamples: list[UpsampleTrilinear] = []
        self.decoder: list[Sequential] = []
        for stage, (skip, count) in enumerate(zip(reversed(config.skip_channels), config.decoder_convs)):
            self.upsamples.append(UpsampleTrilinear(f"up{stage}"))
            layers = []
            channels = in_channels + skip
            for index in range(count):
                name = f"decoder{stage}.{index}"
                layers.append(Conv3d(f"{name}.conv", channels, skip, config.kernel_size, fresh, rng))
                layers.append(LeakyReLU(f"{name}.act", config.negative_slope))
                channels = skip
            self.decoder.append(Sequential(f"decoder{stage}", layers))
            in_channels = skip

        self.head = Conv3d("head", in_channels, 3, config.kernel_size, fresh, rng, init_scale=config.final_init_scale)

        if params is None:
            params = fresh
        elif (
                params.names() != fresh.names()
                or list(params.buffers) != list(fresh.buffers)
                or any(params.values[name].shape != value.shape for name, value in fresh.values.items())
        ):
            raise ValueError("Parameter layout does not match the network configuration")
        self.params = params
        for layer in self._parameterized_layers():
            layer.params = params

        self.padding = PaddingPlan.for_dims(config.input_dims, multiple=2 ** POOL_COUNT)
        self._forward_step: int | None = None
        self._skip_channels: list[int] = []

    def _parameterized_layers(self):
        for block in self.encoder + self.decoder:
            for layer in block.layers:
                if hasattr(layer, "params"):
                    yield layer
        yield self.head

    def forward(self, volume: Volume3D, mode: Mode = Mode.TRAIN) -> DisplacementField:
        """
        Predict a displacement field for one volume. Train mode uses batch statistics and caches activations
        for :meth:`backward`; infer mode uses running statistics.

        :param volume: The patient volume, with the configured input dims
        :param mode: ``train`` or ``infer``
        :return: The displacement field at the input resolution
        """
        if volume.dims != self.config.input_dims:
            raise DimensionMismatchError("Volume does not match the network input", self.config.input_dims, volume.dims)
        mode = Mode(mode)

        features = self.padding.pad(volume.data)[None]
        skips = []
        pools = iter(self.pools)
        for index, block in enumerate(self.encoder):
            features = block.forward(features, mode)
            if index in self.config.pool_after:
                skips.append(features)
                features = next(pools).forward(features, mode)

        self._skip_channels = []
        for upsample, block in zip(self.upsamples, self.decoder):
            features = upsample.forward(features, mode)
            self._skip_channels.append(features.shape[0])
            features = concat_skip_forward(features, skips.pop())
            features = block.forward(features, mode)

        output = self.head.forward(features, mode)
        self._forward_step = self.params.step if mode is Mode.TRAIN else None
        field = self.padding.crop(np.moveaxis(output, 0, -1))
        if not np.all(np.isfinite(field)):
            raise NonFiniteLossError(
                "Network produced non-finite displacements",
                breakdown=dict(non_finite_parameters=self.params.non_finite()),
            )
        return DisplacementField(data=field, spacing=volume.spacing)

    def backward(self, field_gradient: np.ndarray) -> None:
        """
        Accumulate parameter gradients for the last train-mode forward pass.

        :param field_gradient: Gradient of the loss with respect to the field, shape ``(nx, ny, nz, 3)``
        """
        if self._forward_step is None:
            raise StateError("Backward requires a preceding train-mode forward pass")
        if self._forward_step != self.params.step:
            raise StateError("Cached activations are stale: parameters changed since the forward pass")
        expected = (*self.config.input_dims, 3)
        if field_gradient.shape != expected:
            raise DimensionMismatchError("Field gradient shape mismatch", expected, field_gradient.shape)

        upstream = np.moveaxis(self.padding.pad(np.asarray(field_gradient, dtype=np.float64)), -1, 0)
        upstream = self.head.backward(upstream)

        skip_gradients = []
        for upsample, block, decoder_channels in reversed(list(zip(self.upsamples, self.decoder, self._skip_channels))):
            upstream = block.backward(upstream)
            upstream, skip_gradient = concat_skip_backward(upstream, decoder_channels)
            skip_gradients.append(skip_gradient)
            upstream = upsample.backward(upstream)

        pools = iter(reversed(self.pools))
        for index in reversed(range(len(self.encoder))):
            if index in self.config.pool_after:
                upstream = next(pools).backward(upstream) + skip_gradients.pop()
            upstream = self.encoder[index].backward(upstream)

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def signature(self) -> tuple[np.ndarray, ...]:
        layers = self.encoder + self.pools + self.decoder
        return tuple(part for layer in layers for part in layer.signature())
