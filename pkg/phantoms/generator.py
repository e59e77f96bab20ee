"""
Seeded synthetic atlas and patient cases with exact ground truth.

The atlas is a compound of overlapping ellipsoids (mask and homologous mesh from the analytic shape) surrounded by
distractor bone blobs kept clear of the loss band. A case deforms the atlas by an analytic Gaussian warp ``W``:
``p(y) = m(W^-1(y)) + noise + bias``, the ground-truth mesh is ``W(alpha)``, the ground-truth mask is the inside-test
composed with ``W^-1`` and the ground-truth field is ``W(x) - x`` on the atlas grid.
"""
import logging
import warnings
from os import PathLike
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from components.transforms.sampling import identity_grid, sample_trilinear
from components.volumes import (
    DisplacementField,
    Frame,
    Mask3D,
    SurfaceMesh,
    Volume3D,
    write_field,
    write_mask,
    write_mesh,
    write_volume,
)
from engine.manifest import AtlasRecord, CaseRecord, DatasetManifest, save_manifest
from phantoms.shapes import icosphere, inside_shape, radial_surface
from phantoms.spec import PhantomSpec
from phantoms.warps import GaussianWarp
from utilities.concurrency import parallel_map

__all__ = [
    "PhantomAtlas",
    "PhantomCase",
    "make_atlas",
    "make_case",
    "write_dataset",
]

logger = logging.getLogger(__name__)

DISTRACTOR_ATTEMPTS = 1000
MANIFEST_FILE = "manifest.json"
SPEC_FILE = "phantom_spec.json"


class PhantomAtlas(NamedTuple):
    volume: Volume3D
    mask: Mask3D
    mesh: SurfaceMesh


class PhantomCase(NamedTuple):
    volume: Volume3D
    mask: Mask3D
    mesh: SurfaceMesh
    field: DisplacementField
    warp: GaussianWarp


def _smooth(indicator: np.ndarray, sigma: float) -> np.ndarray:
    indicator = indicator.astype(np.float64)
    return ndimage.gaussian_filter(indicator, sigma, mode="nearest") if sigma > 0 else indicator


def _place_distractors(structure: np.ndarray, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    """
    Solid balls whose surface stays at least ``distractor_clearance`` voxels away from the structure
    """
    blobs = np.zeros(spec.dims, dtype=np.bool_)
    if spec.distractors == 0:
        return blobs
    clearance = ndimage.distance_transform_edt(~structure)
    grid = identity_grid(spec.dims)
    low = np.full(3, spec.distractor_radius)
    high = np.array(spec.dims, dtype=np.float64) - 1.0 - spec.distractor_radius
    if np.any(high < low):
        raise ValueError(f"Distractor radius {spec.distractor_radius} does not fit a {spec.dims} grid")

    placed = 0
    for _ in range(DISTRACTOR_ATTEMPTS):
        if placed == spec.distractors:
            break
        center = rng.uniform(low, high)
        nearest = tuple(np.rint(center).astype(np.int64))
        if clearance[nearest] < spec.distractor_radius + spec.distractor_clearance + 1.0:
            continue
        offset = grid - center
        blobs |= np.sum(offset * offset, axis=-1) <= spec.distractor_radius ** 2
        placed += 1
    if placed < spec.distractors:
        message = f"Placed only {placed} of {spec.distractors} distractors clear of the structure"
        logger.warning(message)
        warnings.warn(message)
    return blobs


def make_atlas(spec: PhantomSpec) -> PhantomAtlas:
    """
    Build the atlas triple from the analytic compound shape

    :param spec: The phantom settings
    :return: The atlas volume, its foreground mask and a homologous surface mesh (icosphere order)
    """
    center = spec.shape_center
    grid = identity_grid(spec.dims)
    structure = inside_shape(grid, center, spec.ellipsoids)
    if not structure.any():
        raise ValueError("The compound shape covers no voxel center")

    rng = np.random.default_rng(spec.seed)
    blobs = _place_distractors(structure, spec, rng)
    intensity = (
        spec.background_intensity
        + (spec.structure_intensity - spec.background_intensity) * _smooth(structure, spec.smoothing_sigma)
        + (spec.bone_intensity - spec.background_intensity) * _smooth(blobs, spec.smoothing_sigma)
    )

    directions, triangles = icosphere(spec.mesh_subdivision)
    vertices = radial_surface(directions, center, spec.ellipsoids)
    logger.info("Atlas: %d foreground voxels, %d mesh vertices", int(structure.sum()), len(vertices))
    return PhantomAtlas(
        volume=Volume3D(data=intensity, spacing=spec.spacing),
        mask=Mask3D(data=structure, spacing=spec.spacing),
        mesh=SurfaceMesh(vertices=vertices, triangles=triangles, frame=Frame.ATLAS),
    )


def _bias_field(dims: tuple[int, int, int], amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """
    A random quadratic polynomial in normalized coordinates with peak magnitude ``amplitude``
    """
    if amplitude == 0:
        return np.zeros(dims)
    normalized = [np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1) for n in dims]
    x, y, z = np.meshgrid(*normalized, indexing="ij")
    terms = [x, y, z, x * x, y * y, z * z, x * y, y * z, x * z]
    coefficients = rng.uniform(-1.0, 1.0, size=len(terms))
    polynomial = sum(coefficient * term for coefficient, term in zip(coefficients, terms))
    peak = np.max(np.abs(polynomial))
    return amplitude * polynomial / peak if peak > 0 else np.zeros(dims)


def make_case(atlas: PhantomAtlas, spec: PhantomSpec, case_seed: int) -> PhantomCase:
    """
    Deform the atlas into a synthetic patient with known ground truth

    :param atlas: The atlas triple built from the same spec
    :param spec: The phantom settings
    :param case_seed: Combined with ``spec.seed`` to seed the case generator
    :return: The patient volume, ground-truth mask, mesh, field and the warp itself
    """
    if atlas.volume.dims != spec.dims:
        raise ValueError(f"Atlas dims {atlas.volume.dims} do not match the phantom dims {spec.dims}")
    rng = np.random.default_rng([spec.seed, case_seed])
    warp = GaussianWarp.sample(spec.warp, spec.shape_center, rng)

    grid = identity_grid(spec.dims)
    source = warp.inverse(grid)
    intensity = sample_trilinear(atlas.volume.data, source).values
    contrast = spec.contrast
    if spec.noise_fraction > 0:
        intensity = intensity + rng.normal(0.0, spec.noise_fraction * contrast, size=spec.dims)
    if spec.bias_amplitude > 0:
        intensity = intensity + _bias_field(spec.dims, spec.bias_amplitude * contrast, rng)

    mask = inside_shape(source, spec.shape_center, spec.ellipsoids)
    mesh = atlas.mesh.with_vertices(warp.apply(atlas.mesh.vertices), frame=Frame.PATIENT)
    field = warp.displacement(grid)
    logger.debug("Case %d: max displacement %.3f voxels", case_seed, float(np.max(np.linalg.norm(field, axis=-1))))
    return PhantomCase(
        volume=Volume3D(data=intensity, spacing=spec.spacing),
        mask=Mask3D(data=mask, spacing=spec.spacing),
        mesh=mesh,
        field=DisplacementField(data=field, spacing=spec.spacing),
        warp=warp,
    )


def write_dataset(spec: PhantomSpec, out_dir: str | PathLike, n_cases: int, max_workers: int | None = None) -> Path:
    """
    Generate an atlas and ``n_cases`` cases (case seeds ``0..n_cases-1``) and write them with a manifest.

    Layout: ``atlas/{volume.mvol,mask.mmsk,mesh.obj}``, ``cases/caseNNN/{volume.mvol,mask.mmsk,mesh.obj,field.mfld,warp.json}``,
    ``manifest.json`` with paths relative to ``out_dir`` and ``phantom_spec.json``.

    :return: The manifest path
    """
    if n_cases < 1:
        raise ValueError(f"At least one case is needed, got {n_cases}")
    out_dir = Path(out_dir)
    atlas = make_atlas(spec)
    atlas_dir = out_dir / "atlas"
    atlas_dir.mkdir(parents=True, exist_ok=True)
    write_volume(atlas.volume, atlas_dir / "volume.mvol")
    write_mask(atlas.mask, atlas_dir / "mask.mmsk")
    write_mesh(atlas.mesh, atlas_dir / "mesh.obj")

    def generate(case_seed: int) -> CaseRecord:
        case_id = f"case{case_seed:03d}"
        case = make_case(atlas, spec, case_seed)
        case_dir = out_dir / "cases" / case_id
        case_dir.mkdir(parents=True, exist_ok=True)
        write_volume(case.volume, case_dir / "volume.mvol")
        write_mask(case.mask, case_dir / "mask.mmsk")
        write_mesh(case.mesh, case_dir / "mesh.obj")
        write_field(case.field, case_dir / "field.mfld")
        (case_dir / "warp.json").write_text(case.warp.model_dump_json(indent=2), encoding="utf-8")
        relative = Path("cases") / case_id
        return CaseRecord(
            case_id=case_id,
            volume=relative / "volume.mvol",
            mask=relative / "mask.mmsk",
            mesh=relative / "mesh.obj",
            field=relative / "field.mfld",
        )

    cases = parallel_map(generate, list(range(n_cases)), max_workers)
    manifest = DatasetManifest(
        atlas=AtlasRecord(volume=Path("atlas/volume.mvol"), mask=Path("atlas/mask.mmsk"), mesh=Path("atlas/mesh.obj")),
        cases=cases,
        seed=spec.seed,
    )
    manifest_path = out_dir / MANIFEST_FILE
    save_manifest(manifest, manifest_path)
    (out_dir / SPEC_FILE).write_text(spec.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Wrote %d phantom cases to %s", n_cases, out_dir)
    return manifest_path
