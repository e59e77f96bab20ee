import numpy as np
import pytest
from scipy import ndimage

from components.losses import (
    LossWeights,
    Reduction,
    grad_smoothness,
    grad_smoothness_grad,
    levelset_grad,
    levelset_loss,
    ncc,
    ncc_loss_and_grad,
    total_loss,
)
from components.volumes import DisplacementField, Mask3D, Volume3D, dilate_sphere
from models.utilities.gradient_check import GradcheckScope, check_gradient, run_gradcheck


def strip(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).reshape(1, -1, 1)


@pytest.fixture
def cube_band(cube_mask) -> Mask3D:
    return dilate_sphere(cube_mask, 2.0)


class TestCorrelation:
    def test_self_correlation(self, random_volume):
        assert ncc(random_volume, random_volume).similarity == pytest.approx(1.0)

    def test_anti_correlation(self, random_volume):
        assert ncc(random_volume, random_volume.with_data(-random_volume.data)).similarity == pytest.approx(-1.0)

    def test_pearson_toy_case(self):
        atlas = Volume3D(data=strip([0, 1, 2, 3]))
        warped = Volume3D(data=strip([1, 3, 2, 0]))
        assert ncc(atlas, warped).similarity == pytest.approx(-0.4)

    def test_affine_invariance(self, random_volume, rng):
        other = random_volume.with_data(rng.normal(size=random_volume.dims))
        scaled = other.with_data(3.0 * other.data + 7.0)
        assert ncc(random_volume, scaled).similarity == pytest.approx(ncc(random_volume, other).similarity)

    def test_constant_input_is_degenerate(self, random_volume):
        constant = random_volume.with_data(np.full(random_volume.dims, 2.5))
        result = ncc(random_volume, constant)
        assert result.degenerate
        assert result.similarity == 0.0
        loss = ncc_loss_and_grad(random_volume, constant)
        assert loss.degenerate
        assert not loss.gradient.any()

    def test_loss_is_negated_similarity(self, random_volume):
        loss = ncc_loss_and_grad(random_volume, random_volume)
        assert loss.loss == pytest.approx(-1.0)
        assert not loss.degenerate

    def test_gradient_sums_to_zero(self, random_volume, rng):
        warped = random_volume.with_data(rng.normal(size=random_volume.dims))
        assert abs(ncc_loss_and_grad(random_volume, warped).gradient.sum()) < 1e-12

    def test_gradient_matches_finite_differences(self, rng):
        atlas = Volume3D(data=rng.normal(size=(6, 6, 6)))
        warped = np.ascontiguousarray(rng.normal(size=(6, 6, 6)))
        analytic = ncc_loss_and_grad(atlas, Volume3D(data=warped)).gradient
        check = check_gradient("ncc", lambda: ncc_loss_and_grad(atlas, Volume3D(data=warped)).loss, warped, analytic)
        assert check.checked == warped.size
        assert check.max_relative_error < 1e-5


class TestSmoothness:
    @pytest.mark.parametrize("reduction", list(Reduction))
    def test_constant_field(self, reduction):
        field = DisplacementField.constant((4, 4, 4), (1.0, -2.0, 0.5))
        assert grad_smoothness(field, reduction).value == 0.0
        assert not grad_smoothness_grad(field, reduction).any()

    def test_single_spike(self):
        data = np.zeros((3, 3, 3, 3))
        data[1, 1, 1] = (1.0, 0.0, 0.0)
        field = DisplacementField(data=data)
        assert grad_smoothness(field, Reduction.SUM).value == 6.0

        gradient = grad_smoothness_grad(field, Reduction.SUM)
        expected = np.zeros((3, 3, 3))
        expected[1, 1, 1] = 12.0
        for axis in range(3):
            for offset in (0, 2):
                index = [1, 1, 1]
                index[axis] = offset
                expected[tuple(index)] = -2.0
        assert np.array_equal(gradient[..., 0], expected)
        assert not gradient[..., 1:].any()

    @pytest.mark.parametrize("n", [2, 4, 5])
    def test_linear_ramp(self, n):
        data = np.zeros((n, n, n, 3))
        data[..., 0] = np.arange(n)[:, None, None]
        field = DisplacementField(data=data)
        assert grad_smoothness(field, Reduction.SUM).value == (n - 1) * n * n
        assert grad_smoothness(field, Reduction.MEAN).value == pytest.approx(1.0 / 3.0)

    def test_flat_axes_contribute_nothing(self):
        data = np.zeros((4, 1, 1, 3))
        data[:, 0, 0, 1] = [0.0, 1.0, 3.0, 6.0]
        result = grad_smoothness(DisplacementField(data=data), Reduction.SUM)
        assert result.value == 1.0 + 4.0 + 9.0
        assert not result.degenerate

    def test_single_voxel_is_degenerate(self):
        result = grad_smoothness(DisplacementField.zeros((1, 1, 1)))
        assert result.degenerate
        assert result.value == 0.0


class TestLevelSet:
    def test_strip_case(self):
        warped = Volume3D(data=strip([9, 2, 8, 4, 9]))
        foreground = Mask3D(data=strip([0, 0, 1, 0, 0]))
        band = Mask3D(data=strip([0, 1, 1, 1, 0]))
        assert levelset_loss(warped, foreground, band) == pytest.approx(-2.0 / 3.0)

    def test_strip_gradient(self):
        warped = Volume3D(data=strip([9, 2, 8, 4, 9]))
        foreground = Mask3D(data=strip([0, 0, 1, 0, 0]))
        band = Mask3D(data=strip([0, 1, 1, 1, 0]))
        gradient = levelset_grad(warped, foreground, band)
        assert gradient.dtype == np.float64
        assert np.allclose(gradient.ravel(), [0.0, 1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 0.0])
        assert float(np.sum(gradient * warped.data)) == pytest.approx(levelset_loss(warped, foreground, band))

    def test_zero_image(self, cube_mask, cube_band):
        assert levelset_loss(Volume3D(data=np.zeros(cube_mask.dims)), cube_mask, cube_band) == 0.0

    def test_mask_image(self, cube_mask, cube_band):
        warped = Volume3D(data=cube_mask.data.astype(np.float64))
        assert levelset_loss(warped, cube_mask, cube_band) == pytest.approx(-cube_mask.count / cube_band.count)

    def test_gradient_coefficients(self, cube_mask, cube_band, rng):
        warped = Volume3D(data=rng.normal(size=cube_mask.dims))
        gradient = levelset_grad(warped, cube_mask, cube_band)
        size = cube_band.count
        assert np.allclose(gradient[cube_mask.data], -1.0 / size)
        assert np.allclose(gradient[(cube_band - cube_mask).data], 1.0 / size)
        assert not gradient[(~cube_band).data].any()

    def test_empty_band(self, cube_mask):
        empty = Mask3D(data=np.zeros(cube_mask.dims, dtype=bool))
        with pytest.raises(ValueError):
            levelset_loss(Volume3D(data=np.zeros(cube_mask.dims)), empty, empty)

    def test_band_must_contain_foreground(self, cube_mask):
        smaller = cube_mask.data.copy()
        smaller[3, 3, 3] = False
        with pytest.raises(ValueError):
            levelset_loss(Volume3D(data=np.zeros(cube_mask.dims)), cube_mask, Mask3D(data=smaller))


class TestTotalLoss:
    def test_default_weights(self):
        weights = LossWeights()
        assert (weights.lambda_cc, weights.lambda_gd, weights.lambda_ls) == (0.1, 0.85, 0.05)
        assert weights.without_levelset().lambda_ls == 0.0

    def test_weights_cannot_all_be_zero(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_cc=0.0, lambda_gd=0.0, lambda_ls=0.0)

    def test_identity_registration(self, cube_mask, cube_band, rng):
        atlas = Volume3D(data=ndimage.gaussian_filter(rng.normal(size=cube_mask.dims), 1.0))
        breakdown = total_loss(atlas, atlas, DisplacementField.zeros(atlas.dims), cube_mask, cube_band)
        expected_ls = levelset_loss(atlas, cube_mask, cube_band)
        assert breakdown.cc == pytest.approx(-1.0)
        assert breakdown.gd == 0.0
        assert breakdown.ls == pytest.approx(expected_ls)
        assert breakdown.total == pytest.approx(0.1 * -1.0 + 0.05 * expected_ls)

    def test_breakdown_is_consistent(self, cube_mask, cube_band, rng):
        atlas = Volume3D(data=rng.normal(size=cube_mask.dims))
        patient = Volume3D(data=rng.normal(size=cube_mask.dims))
        field = DisplacementField(data=rng.normal(scale=0.5, size=(*cube_mask.dims, 3)))
        weights = LossWeights(lambda_cc=0.3, lambda_gd=0.5, lambda_ls=0.2)
        breakdown = total_loss(atlas, patient, field, cube_mask, cube_band, weights, Reduction.SUM)
        assert breakdown.cc == -breakdown.cc_similarity
        assert breakdown.total == pytest.approx(0.3 * breakdown.cc + 0.5 * breakdown.gd + 0.2 * breakdown.ls)
        assert breakdown.gradient.shape == field.data.shape
        assert breakdown.is_finite()
        assert set(breakdown.as_row()) == {"cc_similarity", "cc", "gd", "ls", "total"}

    def test_levelset_is_reported_when_disabled(self, cube_mask, cube_band, rng):
        atlas = Volume3D(data=rng.normal(size=cube_mask.dims))
        patient = Volume3D(data=rng.normal(size=cube_mask.dims))
        weights = LossWeights().without_levelset()
        breakdown = total_loss(atlas, patient, DisplacementField.zeros(atlas.dims), cube_mask, cube_band, weights)
        assert breakdown.ls == pytest.approx(levelset_loss(patient, cube_mask, cube_band))
        assert breakdown.total == pytest.approx(0.1 * breakdown.cc)

    def test_gradcheck(self):
        report = run_gradcheck(GradcheckScope.LOSSES, seed=3)
        assert report.passed, report.summary()
