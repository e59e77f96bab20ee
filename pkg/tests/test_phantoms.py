import json

import numpy as np
import pytest

from components.transforms.sampling import identity_grid
from components.volumes import Frame, read_field, read_mask, read_mesh
from engine.manifest import load_manifest
from phantoms.generator import make_atlas, make_case
from phantoms.shapes import ellipsoid_quadratic, icosphere, inside_shape, radial_surface
from phantoms.spec import EllipsoidSpec, PhantomSpec, WarpSpec
from phantoms.warps import GaussianWarp


class TestShapes:
    @pytest.mark.parametrize("level, vertices, triangles", [(0, 12, 20), (2, 162, 320), (3, 642, 1280)])
    def test_icosphere_counts(self, level, vertices, triangles):
        points, faces = icosphere(level)
        assert points.shape == (vertices, 3)
        assert faces.shape == (triangles, 3)
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0)

    def test_icosphere_order_is_fixed(self):
        first, _ = icosphere(2)
        second, _ = icosphere(2)
        assert np.array_equal(first, second)

    def test_negative_level(self):
        with pytest.raises(ValueError):
            icosphere(-1)

    def test_radial_surface_lies_on_the_union_boundary(self, tiny_spec):
        directions, _ = icosphere(2)
        center = tiny_spec.shape_center
        points = radial_surface(directions, center, tiny_spec.ellipsoids)
        quadratics = np.stack([ellipsoid_quadratic(points, center, ellipsoid) for ellipsoid in tiny_spec.ellipsoids])
        assert np.allclose(quadratics.min(axis=0), 1.0)

    def test_inside_shape(self):
        ellipsoid = EllipsoidSpec(name="ball", radii=(2.0, 2.0, 2.0))
        points = np.array([[0.0, 0.0, 0.0], [1.9, 0.0, 0.0], [2.1, 0.0, 0.0]])
        assert inside_shape(points, np.zeros(3), (ellipsoid,)).tolist() == [True, True, False]


class TestSpecValidation:
    def test_ellipsoid_must_contain_the_center(self):
        with pytest.raises(ValueError):
            PhantomSpec(ellipsoids=(EllipsoidSpec(name="off", offset=(5.0, 0.0, 0.0), radii=(2.0, 2.0, 2.0)),))

    def test_shape_must_fit_the_grid(self):
        with pytest.raises(ValueError):
            PhantomSpec(dims=(16, 16, 16))

    def test_bad_range(self):
        with pytest.raises(ValueError):
            WarpSpec(amplitude_range=(2.0, 1.0))


class TestAtlas:
    def test_deterministic(self, tiny_spec):
        first, second = make_atlas(tiny_spec), make_atlas(tiny_spec)
        assert np.array_equal(first.volume.data, second.volume.data)
        assert np.array_equal(first.mask.data, second.mask.data)
        assert np.array_equal(first.mesh.vertices, second.mesh.vertices)

    def test_mesh_matches_the_mask(self, tiny_spec):
        atlas = make_atlas(tiny_spec)
        assert atlas.mesh.vertex_count == 162
        assert atlas.mesh.frame is Frame.ATLAS
        assert np.array_equal(atlas.mask.data, inside_shape(identity_grid(tiny_spec.dims), tiny_spec.shape_center, tiny_spec.ellipsoids))

    def test_distractors_change_only_the_volume(self, tiny_spec):
        plain = make_atlas(tiny_spec.model_copy(update=dict(distractors=0)))
        atlas = make_atlas(tiny_spec)
        assert np.array_equal(plain.mask.data, atlas.mask.data)
        assert not np.array_equal(plain.volume.data, atlas.volume.data)

    def test_crowded_distractors_warn(self, tiny_spec):
        with pytest.warns(UserWarning):
            make_atlas(tiny_spec.model_copy(update=dict(distractors=1500)))


class TestCases:
    def test_identity_warp_reproduces_the_atlas(self, identity_spec):
        atlas = make_atlas(identity_spec)
        case = make_case(atlas, identity_spec, case_seed=0)
        assert np.allclose(case.volume.data, atlas.volume.data)
        assert np.array_equal(case.mask.data, atlas.mask.data)
        assert np.array_equal(case.mesh.vertices, atlas.mesh.vertices)
        assert case.mesh.frame is Frame.PATIENT
        assert not case.field.data.any()

    def test_translation(self, identity_spec):
        spec = identity_spec.model_copy(update=dict(warp=WarpSpec(bumps=0, translation=(2.0, 0.0, 0.0))))
        atlas = make_atlas(spec)
        case = make_case(atlas, spec, case_seed=0)
        assert np.allclose(case.mesh.vertices, atlas.mesh.vertices + [2.0, 0.0, 0.0])
        assert np.allclose(case.field.data, [2.0, 0.0, 0.0])
        assert np.array_equal(case.mask.data[2:], atlas.mask.data[:-2])

    def test_seeded_cases(self, tiny_spec):
        atlas = make_atlas(tiny_spec)
        first, again, other = (make_case(atlas, tiny_spec, seed) for seed in (1, 1, 2))
        assert np.array_equal(first.volume.data, again.volume.data)
        assert not np.array_equal(first.volume.data, other.volume.data)

    def test_ground_truth_is_consistent(self, tiny_spec):
        atlas = make_atlas(tiny_spec)
        case = make_case(atlas, tiny_spec, case_seed=3)
        assert np.allclose(case.mesh.vertices, atlas.mesh.vertices + case.warp.displacement(atlas.mesh.vertices))
        assert np.allclose(case.field.data, case.warp.displacement(identity_grid(tiny_spec.dims)))

    def test_atlas_grid_must_match(self, tiny_spec):
        atlas = make_atlas(tiny_spec)
        with pytest.raises(ValueError):
            make_case(atlas, tiny_spec.model_copy(update=dict(dims=(25, 28, 20))), case_seed=0)


class TestWarps:
    @pytest.fixture
    def warp(self, tiny_spec) -> GaussianWarp:
        return GaussianWarp.sample(tiny_spec.warp, tiny_spec.shape_center, np.random.default_rng(11))

    def test_gradient_bound(self, tiny_spec, warp):
        assert len(warp.sigmas) == tiny_spec.warp.bumps
        assert warp.gradient_bound() < tiny_spec.warp.max_gradient

    def test_inverse(self, warp, rng):
        points = rng.uniform(0.0, 20.0, size=(200, 3))
        assert np.max(np.linalg.norm(warp.apply(warp.inverse(points)) - points, axis=1)) < 1e-6

    def test_strong_bumps_are_rescaled(self):
        spec = WarpSpec(bumps=3, amplitude_range=(5.0, 5.0), sigma_range=(2.0, 2.0))
        with pytest.warns(UserWarning):
            warp = GaussianWarp.sample(spec, np.zeros(3), np.random.default_rng(0))
        assert warp.gradient_bound() < spec.max_gradient

    def test_bumps_need_matching_lengths(self):
        with pytest.raises(ValueError):
            GaussianWarp(centers=((0.0, 0.0, 0.0),), amplitudes=(), sigmas=(1.0,))


class TestDataset:
    def test_layout(self, phantom_manifest):
        root = phantom_manifest.parent
        assert (root / "phantom_spec.json").is_file()
        for name in ("volume.mvol", "mask.mmsk", "mesh.obj"):
            assert (root / "atlas" / name).is_file()
        manifest = load_manifest(phantom_manifest)
        assert [case.case_id for case in manifest.cases] == [f"case{index:03d}" for index in range(6)]
        assert PhantomSpec.model_validate_json((root / "phantom_spec.json").read_text()).seed == 7

    def test_stored_warp_matches_the_field(self, phantom_manifest):
        root = phantom_manifest.parent
        warp = GaussianWarp.model_validate(json.loads((root / "cases" / "case002" / "warp.json").read_text()))
        field = read_field(root / "cases" / "case002" / "field.mfld")
        assert np.allclose(field.data, warp.displacement(identity_grid(field.dims)), atol=1e-5)

    def test_stored_mesh_is_homologous_to_the_atlas(self, phantom_manifest):
        root = phantom_manifest.parent
        atlas_mesh = read_mesh(root / "atlas" / "mesh.obj")
        case_mesh = read_mesh(root / "cases" / "case000" / "mesh.obj")
        assert case_mesh.is_homologous(atlas_mesh)
        assert case_mesh.frame is Frame.PATIENT
        assert read_mask(root / "cases" / "case000" / "mask.mmsk").dims == (24, 28, 20)
