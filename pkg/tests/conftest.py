from pathlib import Path

import numpy as np
import pytest

from components.volumes import DisplacementField, Mask3D, SurfaceMesh, Volume3D
from phantoms.generator import write_dataset
from phantoms.spec import EllipsoidSpec, PhantomSpec, WarpSpec


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def random_volume(rng) -> Volume3D:
    return Volume3D(data=rng.normal(size=(5, 6, 7)), spacing=(0.5, 0.25, 1.0))


@pytest.fixture
def cube_mask() -> Mask3D:
    data = np.zeros((9, 9, 9), dtype=bool)
    data[3:6, 3:6, 3:6] = True
    return Mask3D(data=data)


@pytest.fixture
def triangle_mesh() -> SurfaceMesh:
    return SurfaceMesh(vertices=[[1.0, 1.0, 1.0], [3.0, 1.0, 1.0], [1.0, 3.0, 1.0]], triangles=[[0, 1, 2]])


@pytest.fixture
def tetrahedron() -> SurfaceMesh:
    vertices = [[2.0, 2.0, 2.0], [4.0, 2.0, 2.0], [2.0, 4.0, 2.0], [2.0, 2.0, 4.0]]
    triangles = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]
    return SurfaceMesh(vertices=vertices, triangles=triangles)


@pytest.fixture
def zero_field() -> DisplacementField:
    return DisplacementField.zeros((9, 9, 9))


def tiny_ellipsoids() -> tuple[EllipsoidSpec, ...]:
    return (
        EllipsoidSpec(name="body", offset=(0.0, 0.0, 0.0), radii=(4.0, 3.0, 2.5)),
        EllipsoidSpec(name="process", offset=(0.0, 3.0, 0.0), radii=(1.5, 5.0, 1.5)),
        EllipsoidSpec(name="footplate", offset=(2.0, -1.0, 0.5), radii=(4.0, 2.0, 2.0)),
    )


def make_tiny_spec() -> PhantomSpec:
    return PhantomSpec(
        dims=(24, 28, 20),
        ellipsoids=tiny_ellipsoids(),
        distractors=2,
        distractor_radius=2.0,
        distractor_clearance=4.0,
        warp=WarpSpec(bumps=2, amplitude_range=(0.3, 0.8), sigma_range=(4.0, 6.0), center_spread=3.0, translation_range=0.5),
        mesh_subdivision=2,
        seed=7,
    )


@pytest.fixture
def tiny_spec() -> PhantomSpec:
    return make_tiny_spec()


@pytest.fixture
def identity_spec(tiny_spec) -> PhantomSpec:
    return tiny_spec.model_copy(update=dict(warp=WarpSpec.identity(), noise_fraction=0.0, bias_amplitude=0.0))


@pytest.fixture(scope="session")
def phantom_manifest(tmp_path_factory) -> Path:
    """
    Six tiny phantom cases on disk, enough for a 4/1/1 split
    """
    return write_dataset(make_tiny_spec(), tmp_path_factory.mktemp("phantoms"), n_cases=6)
