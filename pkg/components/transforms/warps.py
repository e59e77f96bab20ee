"""
Spatial transforms driven by one displacement field ``u`` on the atlas grid.

The same field serves two roles: pull-back of a patient volume (sample ``p`` at ``x + u(x)``) and
push-forward of atlas geometry (move points by ``+u``). No field inversion is performed.
"""
import logging
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from components.errors import DimensionMismatchError
from components.transforms.sampling import identity_grid, sample_trilinear
from components.volumes import DisplacementField, Frame, Mask3D, SurfaceMesh, Volume3D

__all__ = [
    "SampleJacobian",
    "PullbackResult",
    "pullback",
    "pullback_grad",
    "pullback_mask",
    "warp_mesh",
    "splat_mask",
]

logger = logging.getLogger(__name__)


class SampleJacobian(BaseModel):
    """
    Spatial gradient of the sampled patient image with respect to the sample coordinate, per atlas voxel
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, data) -> np.ndarray:
        array = np.array(data, dtype=np.float64)
        if array.ndim != 4 or array.shape[3] != 3:
            raise ValueError(f"A sample jacobian must have shape (nx, ny, nz, 3), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Sample jacobian must be finite")
        array.flags.writeable = False
        return array


class PullbackResult(NamedTuple):
    warped: Volume3D
    jacobian: SampleJacobian


def pullback(volume: Volume3D, field: DisplacementField) -> PullbackResult:
    """
    Resample ``volume`` onto the field's grid at ``x + u(x)``.

    :param volume: The patient volume
    :param field: The displacement field on the atlas grid
    :return: The warped volume on the atlas grid and the sampling jacobian for backpropagation
    """
    coordinates = identity_grid(field.dims) + field.data
    sample = sample_trilinear(volume.data, coordinates, with_gradient=True)
    return PullbackResult(
        warped=Volume3D(data=sample.values, spacing=field.spacing),
        jacobian=SampleJacobian(data=sample.gradient),
    )


def pullback_grad(upstream: np.ndarray, jacobian: SampleJacobian) -> np.ndarray:
    """
    Chain a per-voxel loss gradient with respect to the warped image into a gradient with respect to ``u``
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != jacobian.data.shape[:3]:
        raise DimensionMismatchError("Upstream gradient does not match the jacobian", jacobian.data.shape[:3], upstream.shape)
    return upstream[..., None] * jacobian.data


def pullback_mask(mask: Mask3D, field: DisplacementField, threshold: float = 0.5) -> Mask3D:
    """
    Pull a patient-space mask back onto the atlas grid by trilinear sampling and thresholding
    """
    coordinates = identity_grid(field.dims) + field.data
    values = sample_trilinear(mask.data.astype(np.float64), coordinates).values
    return Mask3D(data=values >= threshold, spacing=field.spacing)


def warp_mesh(mesh: SurfaceMesh, field: DisplacementField) -> SurfaceMesh:
    """
    Push atlas mesh vertices forward, ``v -> v + u(v)`` with trilinear ``u``; connectivity and order are kept.

    :param mesh: The atlas-space mesh
    :param field: The displacement field on the atlas grid
    :return: The patient-space mesh
    """
    if mesh.is_empty():
        raise ValueError("Cannot warp an empty mesh")
    displacement = sample_trilinear(field.data, mesh.vertices).values
    return mesh.with_vertices(mesh.vertices + displacement, frame=Frame.PATIENT)


def _supersample_offsets(supersample: int) -> np.ndarray:
    steps = (np.arange(supersample) + 0.5) / supersample - 0.5
    offsets = np.stack(np.meshgrid(steps, steps, steps, indexing="ij"), axis=-1)
    return offsets.reshape(-1, 3)


def splat_mask(mask: Mask3D, field: DisplacementField, supersample: int = 3) -> Mask3D:
    """
    Render an atlas mask in patient space: each foreground voxel is split into ``supersample**3`` points,
    each point is mapped through ``x + u(x)`` and marks its nearest patient voxel. No hole filling.

    :param mask: The atlas-space mask
    :param field: The displacement field on the atlas grid
    :param supersample: Points per voxel along each axis
    :return: The patient-space mask on the field's grid
    """
    if supersample < 1:
        raise ValueError(f"Supersample must be at least 1, got {supersample}")
    mask.require_same_grid(field, "mask/field")

    foreground = np.argwhere(mask.data).astype(np.float64)
    points = (foreground[:, None, :] + _supersample_offsets(supersample)[None, :, :]).reshape(-1, 3)
    mapped = points + sample_trilinear(field.data, points).values

    nearest = np.rint(mapped).astype(np.int64)
    dims = np.array(field.dims)
    inside = np.all((nearest >= 0) & (nearest < dims), axis=1)
    if not inside.all():
        logger.debug("Dropped %d splat points outside the grid", int((~inside).sum()))
    nearest = nearest[inside]

    output = np.zeros(field.dims, dtype=np.bool_)
    output[nearest[:, 0], nearest[:, 1], nearest[:, 2]] = True
    return Mask3D(data=output, spacing=field.spacing)
