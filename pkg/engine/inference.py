import logging
from os import PathLike
from pathlib import Path

from components.transforms import splat_mask, warp_mesh
from components.volumes import DisplacementField, Mask3D, SurfaceMesh, Volume3D, write_mask, write_mesh
from models.network_registrar import NetworkRegistrar
from models.registrar import Segmentation

__all__ = [
    "register_case",
    "segment_case",
    "save_segmentation",
]

logger = logging.getLogger(__name__)


def register_case(checkpoint: str | PathLike, patient: Volume3D) -> DisplacementField:
    """
    Inference-mode forward pass of a trained network

    :param checkpoint: The network checkpoint; its input dims must equal the patient dims
    :param patient: The patient volume
    :return: The displacement field on the atlas grid
    """
    return NetworkRegistrar.from_checkpoint(checkpoint).register(patient)


def segment_case(field: DisplacementField, atlas_mesh: SurfaceMesh, atlas_mask: Mask3D, supersample: int = 3) -> Segmentation:
    """
    Carry the atlas mesh and mask into patient space with one displacement field

    :return: The field, the homologous patient-space mesh and the splatted patient-space mask
    """
    atlas_mask.require_same_grid(field, "atlas mask/field")
    mesh = warp_mesh(atlas_mesh, field)
    mask = splat_mask(atlas_mask, field, supersample)
    logger.debug("Segmented %d vertices and %d mask voxels", mesh.vertex_count, mask.count)
    return Segmentation(field=field, mesh=mesh, mask=mask)


def save_segmentation(segmentation: Segmentation, mesh_path: str | PathLike, mask_path: str | PathLike) -> None:
    for path in (mesh_path, mask_path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_mesh(segmentation.mesh, mesh_path)
    write_mask(segmentation.mask, mask_path)
