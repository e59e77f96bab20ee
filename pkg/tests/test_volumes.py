import numpy as np
import pytest

from components.errors import DataError, DimensionMismatchError, FormatError, TruncationError
from components.volumes import (
    DisplacementField,
    Frame,
    Mask3D,
    SurfaceMesh,
    Volume3D,
    dilate_sphere,
    mask_and,
    mask_not,
    mask_sub,
    read_field,
    read_mask,
    read_mesh,
    read_volume,
    spherical_structuring_element,
    write_field,
    write_mask,
    write_mesh,
    write_volume,
)


class TestValueTypes:
    def test_volume_rejects_non_finite(self):
        data = np.zeros((2, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            Volume3D(data=data)

    def test_volume_data_is_read_only(self, random_volume):
        with pytest.raises(ValueError):
            random_volume.data[0, 0, 0] = 1.0

    def test_mask_rejects_non_binary(self):
        with pytest.raises(ValueError):
            Mask3D(data=np.full((2, 2, 2), 2))

    def test_field_shape(self):
        with pytest.raises(ValueError):
            DisplacementField(data=np.zeros((2, 2, 2, 2)))

    def test_spacing_must_be_positive(self):
        with pytest.raises(ValueError):
            Volume3D(data=np.zeros((2, 2, 2)), spacing=(1.0, 0.0, 1.0))

    def test_mesh_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            SurfaceMesh(vertices=np.zeros((3, 3)), triangles=[[0, 1, 3]])

    def test_mesh_rejects_degenerate_triangle(self):
        with pytest.raises(ValueError):
            SurfaceMesh(vertices=np.zeros((3, 3)), triangles=[[0, 1, 1]])

    def test_require_same_grid(self, random_volume):
        with pytest.raises(DimensionMismatchError):
            random_volume.require_same_grid(Volume3D(data=np.zeros((2, 2, 2))))


class TestFileFormats:
    def test_volume_round_trip(self, tmp_path, rng):
        data = rng.normal(size=(4, 5, 6)).astype(np.float32).astype(np.float64)
        volume = Volume3D(data=data, spacing=(0.2, 0.3, 0.4))
        write_volume(volume, tmp_path / "volume.mvol")
        loaded = read_volume(tmp_path / "volume.mvol")
        assert np.array_equal(loaded.data, volume.data)
        assert loaded.spacing == volume.spacing

    def test_zero_volume_layout(self, tmp_path):
        write_volume(Volume3D(data=np.zeros((2, 2, 2))), tmp_path / "zeros.mvol")
        raw = (tmp_path / "zeros.mvol").read_bytes()
        header, payload = raw.split(b"\n\n", 1)
        assert header.decode("ascii").split("\n") == ["MVOL1", "dims 2 2 2", "spacing 1.0 1.0 1.0", "dtype f32"]
        assert payload == bytes(8 * 4)

    def test_payload_is_x_fastest(self, tmp_path):
        data = np.zeros((2, 2, 1))
        data[1, 0, 0] = 1.0
        write_volume(Volume3D(data=data), tmp_path / "order.mvol")
        payload = (tmp_path / "order.mvol").read_bytes().split(b"\n\n", 1)[1]
        assert np.frombuffer(payload, dtype="<f4").tolist() == [0.0, 1.0, 0.0, 0.0]

    def test_truncated_payload(self, tmp_path):
        header = b"MVOL1\ndims 4 4 4\nspacing 1.0 1.0 1.0\ndtype f32\n\n"
        (tmp_path / "short.mvol").write_bytes(header + bytes(63 * 4))
        with pytest.raises(TruncationError):
            read_volume(tmp_path / "short.mvol")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.mvol").write_bytes(b"NOPE\ndims 1 1 1\nspacing 1 1 1\ndtype f32\n\n" + bytes(4))
        with pytest.raises(FormatError):
            read_volume(tmp_path / "bad.mvol")

    def test_non_finite_payload(self, tmp_path):
        header = b"MVOL1\ndims 1 1 1\nspacing 1.0 1.0 1.0\ndtype f32\n\n"
        (tmp_path / "nan.mvol").write_bytes(header + np.array([np.inf], dtype="<f4").tobytes())
        with pytest.raises(DataError):
            read_volume(tmp_path / "nan.mvol")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_volume(tmp_path / "absent.mvol")

    def test_mask_payload(self, tmp_path):
        write_mask(Mask3D(data=np.ones((3, 3, 3), dtype=bool)), tmp_path / "ones.mmsk")
        payload = (tmp_path / "ones.mmsk").read_bytes().split(b"\n\n", 1)[1]
        assert payload == bytes([1] * 27)
        assert read_mask(tmp_path / "ones.mmsk").count == 27

    def test_field_payload_is_interleaved(self, tmp_path):
        field = DisplacementField.constant((2, 1, 1), (0.5, -1.0, 2.0))
        write_field(field, tmp_path / "field.mfld")
        payload = (tmp_path / "field.mfld").read_bytes().split(b"\n\n", 1)[1]
        assert np.frombuffer(payload, dtype="<f4").tolist() == [0.5, -1.0, 2.0, 0.5, -1.0, 2.0]
        assert np.array_equal(read_field(tmp_path / "field.mfld").data, field.data)

    def test_field_round_trip_keeps_components(self, tmp_path, rng):
        data = rng.normal(size=(3, 4, 5, 3)).astype(np.float32).astype(np.float64)
        write_field(DisplacementField(data=data), tmp_path / "random.mfld")
        assert np.array_equal(read_field(tmp_path / "random.mfld").data, data)

    def test_mesh_lines(self, tmp_path, triangle_mesh):
        write_mesh(triangle_mesh, tmp_path / "mesh.obj")
        lines = (tmp_path / "mesh.obj").read_text().splitlines()
        assert sum(line.startswith("v ") for line in lines) == 3
        assert [line for line in lines if line.startswith("f ")] == ["f 1 2 3"]

    def test_mesh_round_trip(self, tmp_path, tetrahedron):
        mesh = tetrahedron.with_vertices(tetrahedron.vertices + 0.1, frame=Frame.PATIENT)
        write_mesh(mesh, tmp_path / "mesh.obj")
        loaded = read_mesh(tmp_path / "mesh.obj")
        assert np.array_equal(loaded.vertices, mesh.vertices)
        assert np.array_equal(loaded.triangles, mesh.triangles)
        assert loaded.frame is Frame.PATIENT

    def test_mesh_ignores_comments(self, tmp_path):
        (tmp_path / "mesh.obj").write_text("# exported\nv 0 0 0\nv 1 0 0\nv 0 1 0\n# faces\nf 1 2 3\n")
        assert read_mesh(tmp_path / "mesh.obj").vertex_count == 3

    def test_mesh_unsupported_record(self, tmp_path):
        (tmp_path / "mesh.obj").write_text("v 0 0 0\nvn 0 0 1\n")
        with pytest.raises(FormatError):
            read_mesh(tmp_path / "mesh.obj")


class TestMorphology:
    def test_structuring_element_cardinality(self):
        assert spherical_structuring_element(3.0).sum() == 123

    def test_cardinality_matches_lattice_enumeration(self):
        expected = sum(
            1
            for x in range(-3, 4) for y in range(-3, 4) for z in range(-3, 4)
            if x * x + y * y + z * z <= 9
        )
        assert spherical_structuring_element(3.0).sum() == expected

    def test_single_voxel_dilation(self):
        data = np.zeros((9, 9, 9), dtype=bool)
        data[4, 4, 4] = True
        assert dilate_sphere(Mask3D(data=data), 3.0).count == 123

    def test_empty_and_full(self):
        empty = Mask3D(data=np.zeros((5, 5, 5), dtype=bool))
        full = Mask3D(data=np.ones((5, 5, 5), dtype=bool))
        assert dilate_sphere(empty, 2.0).is_empty()
        assert dilate_sphere(full, 2.0).count == 125

    def test_radius_must_be_positive(self, cube_mask):
        with pytest.raises(ValueError):
            dilate_sphere(cube_mask, 0.0)

    def test_monotone_in_radius(self, cube_mask):
        assert dilate_sphere(cube_mask, 1.5).issubset(dilate_sphere(cube_mask, 2.5))

    def test_translation_equivariance(self):
        data = np.zeros((15, 15, 15), dtype=bool)
        data[6, 7, 7] = True
        data[7, 6, 8] = True
        shifted = np.roll(data, 1, axis=0)
        first = dilate_sphere(Mask3D(data=data), 2.0).data
        second = dilate_sphere(Mask3D(data=shifted), 2.0).data
        assert np.array_equal(np.roll(first, 1, axis=0)[3:12, 3:12, 3:12], second[3:12, 3:12, 3:12])

    def test_band_algebra(self, cube_mask):
        band = dilate_sphere(cube_mask, 3.0)
        assert np.array_equal(mask_and(cube_mask, band).data, cube_mask.data)
        background = mask_and(mask_not(cube_mask), band)
        assert np.array_equal(background.data, mask_sub(band, cube_mask).data)
        assert mask_sub(cube_mask, cube_mask).is_empty()
