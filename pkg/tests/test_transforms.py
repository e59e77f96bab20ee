import numpy as np
import pytest

from components.transforms import (
    identity_grid,
    pullback,
    pullback_grad,
    pullback_mask,
    sample_trilinear,
    splat_mask,
    warp_mesh,
)
from components.volumes import DisplacementField, Frame, Mask3D, Volume3D


def naive_trilinear(array: np.ndarray, point: np.ndarray) -> float:
    upper = np.array(array.shape) - 1
    x, y, z = np.clip(point, 0, upper)
    x0, y0, z0 = (min(int(np.floor(value)), max(n - 2, 0)) for value, n in zip((x, y, z), array.shape))
    x1, y1, z1 = min(x0 + 1, upper[0]), min(y0 + 1, upper[1]), min(z0 + 1, upper[2])
    fx, fy, fz = x - x0, y - y0, z - z0
    total = 0.0
    for cx, wx in ((x0, 1 - fx), (x1, fx)):
        for cy, wy in ((y0, 1 - fy), (y1, fy)):
            for cz, wz in ((z0, 1 - fz), (z1, fz)):
                total += wx * wy * wz * array[cx, cy, cz]
    return total


class TestSampling:
    def test_identity_grid(self):
        grid = identity_grid((2, 3, 4))
        assert grid.shape == (2, 3, 4, 3)
        assert grid[1, 2, 3].tolist() == [1.0, 2.0, 3.0]

    def test_matches_corner_loop(self, rng):
        array = rng.normal(size=(5, 5, 5))
        points = rng.uniform(-1.0, 5.0, size=(200, 3))
        values = sample_trilinear(array, points).values
        expected = np.array([naive_trilinear(array, point) for point in points])
        assert np.max(np.abs(values - expected)) < 1e-12

    def test_gradient_is_zero_on_clamped_axes(self, rng):
        array = rng.normal(size=(4, 4, 4))
        sample = sample_trilinear(array, np.array([[-2.0, 1.5, 1.5]]), with_gradient=True)
        assert sample.gradient[0, 0] == 0.0
        assert sample.gradient[0, 1] != 0.0


class TestPullback:
    def test_zero_field_is_identity(self, random_volume):
        warped = pullback(random_volume, DisplacementField.zeros(random_volume.dims)).warped
        assert np.array_equal(warped.data, random_volume.data)

    def test_midpoint(self):
        data = np.zeros((2, 1, 1))
        data[1, 0, 0] = 10.0
        field = np.zeros((2, 1, 1, 3))
        field[0, 0, 0] = (0.5, 0.0, 0.0)
        warped = pullback(Volume3D(data=data), DisplacementField(data=field)).warped
        assert warped.data[0, 0, 0] == 5.0

    def test_matches_corner_loop(self, rng):
        patient = rng.normal(size=(5, 5, 5))
        field = rng.normal(scale=1.5, size=(5, 5, 5, 3))
        warped = pullback(Volume3D(data=patient), DisplacementField(data=field)).warped.data
        grid = identity_grid((5, 5, 5))
        expected = np.array([naive_trilinear(patient, point) for point in (grid + field).reshape(-1, 3)])
        assert np.max(np.abs(warped.ravel() - expected)) < 1e-12

    def test_linear_in_volume(self, rng):
        first = Volume3D(data=rng.normal(size=(4, 5, 6)))
        second = Volume3D(data=rng.normal(size=(4, 5, 6)))
        field = DisplacementField(data=rng.normal(size=(4, 5, 6, 3)))
        combined = pullback(Volume3D(data=2.0 * first.data - 3.0 * second.data), field).warped.data
        expected = 2.0 * pullback(first, field).warped.data - 3.0 * pullback(second, field).warped.data
        assert np.max(np.abs(combined - expected)) < 1e-12

    def test_gradient_of_zero_upstream(self, rng, random_volume):
        field = DisplacementField(data=rng.normal(size=(*random_volume.dims, 3)))
        jacobian = pullback(random_volume, field).jacobian
        assert not pullback_grad(np.zeros(random_volume.dims), jacobian).any()

    def test_gradient_of_single_voxel(self, rng, random_volume):
        field = DisplacementField(data=rng.normal(size=(*random_volume.dims, 3)))
        jacobian = pullback(random_volume, field).jacobian
        upstream = np.zeros(random_volume.dims)
        upstream[1, 2, 3] = 1.0
        gradient = pullback_grad(upstream, jacobian)
        assert np.array_equal(gradient[1, 2, 3], jacobian.data[1, 2, 3])
        gradient[1, 2, 3] = 0.0
        assert not gradient.any()

    def test_gradient_shape_mismatch(self, rng, random_volume):
        jacobian = pullback(random_volume, DisplacementField.zeros(random_volume.dims)).jacobian
        with pytest.raises(ValueError):
            pullback_grad(np.zeros((2, 2, 2)), jacobian)

    def test_pullback_mask_zero_field(self, cube_mask, zero_field):
        assert np.array_equal(pullback_mask(cube_mask, zero_field).data, cube_mask.data)


class TestWarpMesh:
    def test_zero_field(self, tetrahedron, zero_field):
        warped = warp_mesh(tetrahedron, zero_field)
        assert np.array_equal(warped.vertices, tetrahedron.vertices)
        assert warped.frame is Frame.PATIENT

    def test_constant_field(self, tetrahedron):
        warped = warp_mesh(tetrahedron, DisplacementField.constant((9, 9, 9), (2.0, 0.0, 0.0)))
        assert np.array_equal(warped.vertices, tetrahedron.vertices + [2.0, 0.0, 0.0])
        assert np.array_equal(warped.triangles, tetrahedron.triangles)

    def test_matches_corner_loop(self, rng, tetrahedron):
        field = rng.normal(size=(9, 9, 9, 3))
        vertices = rng.uniform(1.0, 7.0, size=(30, 3))
        mesh = tetrahedron.with_vertices(np.vstack([tetrahedron.vertices, vertices]))
        warped = warp_mesh(mesh, DisplacementField(data=field))
        for index, vertex in enumerate(mesh.vertices):
            expected = vertex + [naive_trilinear(field[..., axis], vertex) for axis in range(3)]
            assert np.max(np.abs(warped.vertices[index] - expected)) < 1e-12


class TestSplat:
    @pytest.mark.parametrize("supersample", [1, 3, 5])
    def test_zero_field(self, cube_mask, zero_field, supersample):
        assert np.array_equal(splat_mask(cube_mask, zero_field, supersample).data, cube_mask.data)

    def test_integer_translation(self):
        data = np.zeros((6, 6, 6), dtype=bool)
        data[2, 2, 2] = True
        splatted = splat_mask(Mask3D(data=data), DisplacementField.constant((6, 6, 6), (1.0, 0.0, 0.0)))
        assert np.argwhere(splatted.data).tolist() == [[3, 2, 2]]

    def test_supersample_must_be_positive(self, cube_mask, zero_field):
        with pytest.raises(ValueError):
            splat_mask(cube_mask, zero_field, 0)

    def test_supersampling_only_changes_the_boundary(self, cube_mask):
        grid = identity_grid((9, 9, 9))
        field = 0.3 * np.sin(grid / 3.0)
        coarse = splat_mask(cube_mask, DisplacementField(data=field), 3).data
        fine = splat_mask(cube_mask, DisplacementField(data=field), 5).data
        union = coarse | fine
        interior = union.copy()
        for axis in range(3):
            for shift in (-1, 1):
                interior &= np.roll(union, shift, axis=axis)
        assert not np.any((coarse ^ fine) & interior)
