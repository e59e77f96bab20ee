import numpy as np
import pytest

from components.errors import DimensionMismatchError, StateError
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
    conv3d_forward,
    interpolation_matrix,
    maxpool3d_backward,
    maxpool3d_forward,
    upsample_trilinear_forward,
)
from models.network_params import NetworkParams
from models.utilities.gradient_check import GradcheckScope, run_gradcheck


def nested_loop_conv(features: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    out_channels, in_channels, size = kernel.shape[:3]
    pad = size // 2
    _, nx, ny, nz = features.shape
    output = np.zeros((out_channels, nx, ny, nz))
    for o in range(out_channels):
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    total = bias[o]
                    for i in range(in_channels):
                        for dx in range(size):
                            for dy in range(size):
                                for dz in range(size):
                                    sx, sy, sz = x + dx - pad, y + dy - pad, z + dz - pad
                                    if 0 <= sx < nx and 0 <= sy < ny and 0 <= sz < nz:
                                        total += kernel[o, i, dx, dy, dz] * features[i, sx, sy, sz]
                    output[o, x, y, z] = total
    return output


class TestConvolution:
    def test_matches_nested_loops(self, rng):
        features = rng.normal(size=(2, 4, 5, 3))
        kernel = rng.normal(size=(3, 2, 3, 3, 3))
        bias = rng.normal(size=3)
        assert np.max(np.abs(conv3d_forward(features, kernel, bias) - nested_loop_conv(features, kernel, bias))) < 1e-12

    def test_identity_kernel(self, rng):
        features = rng.normal(size=(1, 4, 4, 4))
        kernel = np.zeros((1, 1, 3, 3, 3))
        kernel[0, 0, 1, 1, 1] = 1.0
        assert np.array_equal(conv3d_forward(features, kernel, np.zeros(1)), features)

    def test_even_kernel_is_rejected(self, rng):
        with pytest.raises(ValueError):
            conv3d_forward(rng.normal(size=(1, 4, 4, 4)), np.zeros((1, 1, 2, 2, 2)), np.zeros(1))

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            conv3d_forward(rng.normal(size=(2, 4, 4, 4)), np.zeros((1, 3, 3, 3, 3)), np.zeros(1))

    def test_layer_registers_parameters(self, rng):
        params = NetworkParams()
        Conv3d("conv", 2, 4, 3, params, rng)
        assert params.names() == ["conv.kernel", "conv.bias"]
        assert params.parameter_count() == 27 * 2 * 4 + 4

    def test_scaled_initialization(self, rng):
        params = NetworkParams()
        Conv3d("head", 4, 3, 3, params, rng, init_scale=0.0)
        assert not params.values["head.kernel"].any()


class TestPooling:
    def test_forward_and_routing(self):
        features = np.arange(8, dtype=np.float64).reshape(1, 2, 2, 2)
        pooled, winners = maxpool3d_forward(features)
        assert pooled.shape == (1, 1, 1, 1)
        assert pooled[0, 0, 0, 0] == 7.0
        routed = maxpool3d_backward(np.full((1, 1, 1, 1), 3.0), winners)
        expected = np.zeros((1, 2, 2, 2))
        expected[0, 1, 1, 1] = 3.0
        assert np.array_equal(routed, expected)

    def test_ties_take_the_first_index(self):
        _, winners = maxpool3d_forward(np.ones((1, 2, 2, 2)))
        assert winners[0, 0, 0, 0] == 0

    def test_odd_dims_are_rejected(self):
        with pytest.raises(RuntimeError):
            maxpool3d_forward(np.zeros((1, 3, 2, 2)))


class TestUpsampling:
    @pytest.mark.parametrize("length", [1, 2, 5])
    def test_rows_sum_to_one(self, length):
        matrix = interpolation_matrix(length)
        assert matrix.shape == (2 * length, length)
        assert np.allclose(matrix.sum(axis=1), 1.0)

    def test_constant_is_preserved(self):
        upsampled = upsample_trilinear_forward(np.full((2, 3, 2, 4), 1.5))
        assert upsampled.shape == (2, 6, 4, 8)
        assert np.allclose(upsampled, 1.5)

    def test_pool_then_upsample_tracks_a_ramp(self):
        ramp = np.broadcast_to(np.arange(16.0)[:, None, None], (16, 4, 4))[None].copy()
        pooled, _ = maxpool3d_forward(ramp)
        restored = upsample_trilinear_forward(pooled)
        interior = (slice(None), slice(1, -1))
        assert np.max(np.abs(restored[interior] - ramp[interior])) <= 0.5 + 1e-12


class TestBatchNorm:
    def test_train_mode_normalizes(self, rng):
        params = NetworkParams()
        layer = BatchNorm3d("norm", 2, params, eps=0.0)
        features = rng.normal(loc=3.0, scale=2.0, size=(2, 4, 5, 6))
        output = layer.forward(features, Mode.TRAIN)
        assert np.allclose(output.mean(axis=(1, 2, 3)), 0.0)
        assert np.allclose(output.var(axis=(1, 2, 3)), 1.0)

    def test_running_statistics(self, rng):
        params = NetworkParams()
        layer = BatchNorm3d("norm", 1, params, momentum=0.1)
        features = rng.normal(loc=2.0, size=(1, 3, 3, 3))
        layer.forward(features, Mode.TRAIN)
        assert params.buffers["norm.running_mean"][0] == pytest.approx(0.1 * features.mean())
        assert params.buffers["norm.running_var"][0] == pytest.approx(0.9 + 0.1 * features.var(ddof=1))

    def test_infer_mode_uses_running_statistics(self, rng):
        params = NetworkParams()
        layer = BatchNorm3d("norm", 1, params, eps=0.0)
        params.buffers["norm.running_mean"][:] = 1.0
        params.buffers["norm.running_var"][:] = 4.0
        features = rng.normal(size=(1, 2, 2, 2))
        output = layer.forward(features, Mode.INFER)
        assert np.allclose(output, (features - 1.0) / 2.0)
        assert params.buffers["norm.running_mean"][0] == 1.0


class TestComposition:
    def test_leaky_relu(self):
        layer = LeakyReLU("act", 0.2)
        output = layer.forward(np.array([-1.0, 0.0, 2.0]).reshape(1, 3, 1, 1))
        assert output.ravel().tolist() == [-0.2, 0.0, 2.0]
        assert layer.backward(np.ones((1, 3, 1, 1))).ravel().tolist() == [0.2, 0.2, 1.0]

    def test_backward_needs_forward(self):
        with pytest.raises(StateError):
            LeakyReLU("act").backward(np.ones((1, 2, 2, 2)))

    def test_sequential_chains_layers(self, rng):
        block = Sequential("block", [LeakyReLU("act"), MaxPool3d("pool"), UpsampleTrilinear("up")])
        features = rng.normal(size=(2, 4, 4, 4))
        output = block.forward(features)
        assert output.shape == features.shape
        assert block.backward(np.ones_like(output)).shape == features.shape

    def test_concat_skip(self, rng):
        decoder = rng.normal(size=(2, 3, 3, 3))
        skip = rng.normal(size=(4, 3, 3, 3))
        joined = concat_skip_forward(decoder, skip)
        assert joined.shape == (6, 3, 3, 3)
        back_decoder, back_skip = concat_skip_backward(joined, 2)
        assert np.array_equal(back_decoder, decoder)
        assert np.array_equal(back_skip, skip)

    def test_concat_resolution_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            concat_skip_forward(rng.normal(size=(1, 2, 2, 2)), rng.normal(size=(1, 4, 4, 4)))

    def test_gradcheck(self):
        report = run_gradcheck(GradcheckScope.LAYERS, seed=1)
        assert report.passed, report.summary()
