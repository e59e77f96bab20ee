import logging
from abc import ABC, abstractmethod
from typing import NamedTuple

from components.transforms import splat_mask, warp_mesh
from components.volumes import DisplacementField, Mask3D, SurfaceMesh, Volume3D
from models.utilities.registration_method import RegistrationMethod

__all__ = [
    "Segmentation",
    "Registrar",
]

logger = logging.getLogger(__name__)


class Segmentation(NamedTuple):
    field: DisplacementField
    mesh: SurfaceMesh
    mask: Mask3D


class Registrar(ABC):
    """
    Produces the displacement field that aligns a patient volume with the atlas grid.
    The same field pulls the patient back onto the atlas and pushes atlas geometry forward into the patient.
    """

    def __init__(self, method: RegistrationMethod):
        self.method = RegistrationMethod(method)
        self._supersample = 3

    # <editor-fold desc="Hyperparameters">
    @property
    def supersample(self) -> int:
        return self._supersample

    @supersample.setter
    def supersample(self, value: int):
        if value < 1:
            raise ValueError("Supersample must be at least 1!")
        self._supersample = int(value)

    # </editor-fold>

    def register(self, patient: Volume3D) -> DisplacementField:
        """
        :param patient: The patient volume, on the atlas grid dimensions
        :return: The displacement field on the atlas grid
        """
        field = self._register(patient)
        logger.debug("%s registration: max displacement %.4f voxels", self.method, field.max_norm())
        return field

    def segment(self, patient: Volume3D, atlas_mesh: SurfaceMesh, atlas_mask: Mask3D) -> Segmentation:
        """
        Register the patient and carry the atlas mesh and mask into patient space with the resulting field

        :param patient: The patient volume
        :param atlas_mesh: The atlas surface mesh
        :param atlas_mask: The atlas structure mask
        :return: The field, the patient-space mesh (homologous to ``atlas_mesh``) and the patient-space mask
        """
        field = self.register(patient)
        return Segmentation(
            field=field,
            mesh=warp_mesh(atlas_mesh, field),
            mask=splat_mask(atlas_mask, field, self.supersample),
        )

    @abstractmethod
    def _register(self, patient: Volume3D) -> DisplacementField:
        pass
