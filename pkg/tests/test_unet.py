import numpy as np
import pytest

from components.errors import DimensionMismatchError, NonFiniteLossError, StateError
from components.volumes import Volume3D
from models.layers import Mode
from models.optimizers.adam import Adam
from models.unet import NetConfig, UNet3D
from models.utilities.gradient_check import GradcheckScope, check_end_to_end, run_gradcheck
from models.utilities.padding import PaddingPlan


@pytest.fixture
def small_config() -> NetConfig:
    return NetConfig(input_dims=(12, 10, 6), base_channels=2, final_init_scale=0.1, seed=5)


@pytest.fixture
def small_volume(rng, small_config) -> Volume3D:
    return Volume3D(data=rng.normal(size=small_config.input_dims))


class TestNetConfig:
    def test_default_parameter_count(self):
        assert NetConfig().parameter_count() == 1_607_091

    def test_built_network_matches_the_count(self):
        assert UNet3D(NetConfig()).params.parameter_count() == 1_607_091

    def test_encoder_channels(self):
        assert NetConfig().encoder_channels == [16, 16, 32, 32, 64, 64, 128, 128]
        assert NetConfig().skip_channels == [16, 32, 64]

    @pytest.mark.parametrize("base_channels", [1, 2, 4])
    def test_count_formula_matches_the_layers(self, base_channels):
        config = NetConfig(input_dims=(8, 8, 8), base_channels=base_channels)
        assert UNet3D(config).params.parameter_count() == config.parameter_count()

    def test_hash_tracks_the_architecture(self):
        assert NetConfig().config_hash() == NetConfig().config_hash()
        assert NetConfig().config_hash() != NetConfig(base_channels=8).config_hash()

    def test_even_kernel_is_rejected(self):
        with pytest.raises(ValueError):
            NetConfig(kernel_size=4)

    def test_pool_positions_must_increase(self):
        with pytest.raises(ValueError):
            NetConfig(pool_after=(3, 1, 5))


class TestPadding:
    def test_default_input(self):
        plan = PaddingPlan.for_dims((64, 76, 44))
        assert plan.padded_dims == (64, 80, 48)
        assert plan.low == (0, 2, 2)
        assert plan.high == (0, 2, 2)

    def test_uneven_split_puts_the_extra_voxel_high(self):
        plan = PaddingPlan.for_dims((5, 8, 1))
        assert plan.padded_dims == (8, 8, 8)
        assert plan.low == (1, 0, 3)
        assert plan.high == (2, 0, 4)

    def test_crop_inverts_pad(self, rng):
        plan = PaddingPlan.for_dims((5, 7, 3))
        array = rng.normal(size=(5, 7, 3, 3))
        padded = plan.pad(array)
        assert padded.shape == (8, 8, 8, 3)
        assert np.array_equal(plan.crop(padded), array)

    def test_non_positive_dims(self):
        with pytest.raises(ValueError):
            PaddingPlan.for_dims((0, 4, 4))


class TestForwardBackward:
    def test_output_matches_the_input_grid(self, small_config, small_volume):
        field = UNet3D(small_config).forward(small_volume, Mode.INFER)
        assert field.dims == small_config.input_dims
        assert field.data.shape == (*small_config.input_dims, 3)

    def test_zero_head_predicts_zero_field(self, small_config, small_volume):
        config = small_config.model_copy(update=dict(final_init_scale=0.0))
        field = UNet3D(config).forward(small_volume, Mode.TRAIN)
        assert not field.data.any()

    def test_default_head_starts_near_identity(self, small_volume):
        config = NetConfig(input_dims=small_volume.dims, base_channels=2)
        assert UNet3D(config).forward(small_volume, Mode.INFER).max_norm() < 1e-2

    def test_same_seed_same_weights(self, small_config):
        first, second = UNet3D(small_config), UNet3D(small_config)
        assert all(np.array_equal(first.params.values[name], second.params.values[name]) for name in first.params.names())

    def test_wrong_input_dims(self, small_config):
        with pytest.raises(DimensionMismatchError):
            UNet3D(small_config).forward(Volume3D(data=np.zeros((4, 4, 4))))

    def test_backward_needs_a_train_forward(self, small_config, small_volume):
        network = UNet3D(small_config)
        network.forward(small_volume, Mode.INFER)
        with pytest.raises(StateError):
            network.backward(np.zeros((*small_config.input_dims, 3)))

    def test_backward_rejects_stale_activations(self, small_config, small_volume):
        network = UNet3D(small_config)
        network.forward(small_volume, Mode.TRAIN)
        Adam().step(network.params)
        with pytest.raises(StateError):
            network.backward(np.zeros((*small_config.input_dims, 3)))

    def test_backward_reaches_every_kernel(self, small_config, small_volume, rng):
        network = UNet3D(small_config)
        network.zero_grad()
        network.forward(small_volume, Mode.TRAIN)
        network.backward(rng.normal(size=(*small_config.input_dims, 3)))
        assert all(np.any(network.params.grads[name]) for name in network.params.names() if name.endswith(".kernel"))

    def test_gradients_accumulate_until_zeroed(self, small_config, small_volume, rng):
        network = UNet3D(small_config)
        upstream = rng.normal(size=(*small_config.input_dims, 3))
        network.zero_grad()
        network.forward(small_volume, Mode.TRAIN)
        network.backward(upstream)
        once = {name: gradient.copy() for name, gradient in network.params.grads.items()}

        network.forward(small_volume, Mode.TRAIN)
        network.backward(upstream)
        for name, gradient in once.items():
            assert np.allclose(network.params.grads[name], 2.0 * gradient, rtol=1e-12, atol=0.0)

        network.zero_grad()
        assert not any(gradient.any() for gradient in network.params.grads.values())

    def test_non_finite_parameters_abort_the_forward_pass(self, small_config, small_volume):
        network = UNet3D(small_config)
        network.params.values["head.bias"][0] = np.nan
        with pytest.raises(NonFiniteLossError) as error:
            network.forward(small_volume, Mode.TRAIN)
        assert error.value.breakdown == dict(non_finite_parameters=["head.bias"])

    def test_infer_mode_keeps_running_statistics(self, small_config, small_volume):
        network = UNet3D(small_config)
        before = {name: value.copy() for name, value in network.params.buffers.items()}
        network.forward(small_volume, Mode.INFER)
        assert all(np.array_equal(before[name], value) for name, value in network.params.buffers.items())

    def test_foreign_parameters_are_rejected(self, small_config):
        other = UNet3D(small_config.model_copy(update=dict(base_channels=3)))
        with pytest.raises(ValueError):
            UNet3D(small_config, params=other.params)

    def test_end_to_end_audit_covers_every_sample(self):
        checks = check_end_to_end(seed=1, samples=6)
        assert sum(check.checked + check.skipped for check in checks) == 6
        assert all(check.name.startswith("network.") for check in checks)

    @pytest.mark.slow
    def test_gradcheck_end_to_end(self):
        report = run_gradcheck(GradcheckScope.END_TO_END, seed=0)
        assert report.passed, report.summary()
