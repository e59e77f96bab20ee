from models.layers.layer import Layer, Sequential, Mode
from models.layers.convolution import Conv3d, conv3d_forward, conv3d_backward
from models.layers.pooling import MaxPool3d, maxpool3d_forward, maxpool3d_backward
from models.layers.upsampling import (
    UpsampleTrilinear,
    upsample_trilinear_forward,
    upsample_trilinear_backward,
    interpolation_matrix,
)
from models.layers.activation import LeakyReLU, leaky_relu_forward, leaky_relu_backward
from models.layers.normalization import BatchNorm3d, BatchNormCache, batchnorm3d_forward, batchnorm3d_backward
from models.layers.concatenation import concat_skip_forward, concat_skip_backward

__all__ = [
    "Layer",
    "Sequential",
    "Mode",

    "Conv3d",
    "conv3d_forward",
    "conv3d_backward",

    "MaxPool3d",
    "maxpool3d_forward",
    "maxpool3d_backward",

    "UpsampleTrilinear",
    "upsample_trilinear_forward",
    "upsample_trilinear_backward",
    "interpolation_matrix",

    "LeakyReLU",
    "leaky_relu_forward",
    "leaky_relu_backward",

    "BatchNorm3d",
    "BatchNormCache",
    "batchnorm3d_forward",
    "batchnorm3d_backward",

    "concat_skip_forward",
    "concat_skip_backward",
]
