from os import PathLike
from typing import Self

from components.volumes import DisplacementField, Volume3D
from models.checkpoint import load_checkpoint
from models.layers import Mode
from models.registrar import Registrar
from models.unet import UNet3D
from models.utilities.registration_method import RegistrationMethod

__all__ = [
    "NetworkRegistrar",
]


class NetworkRegistrar(Registrar):
    """
    Amortized registration: a single inference-mode forward pass of a trained network
    """

    def __init__(self, network: UNet3D, method: RegistrationMethod = RegistrationMethod.NETWORK):
        super().__init__(method)
        self.network = network

    @classmethod
    def from_checkpoint(cls, path: str | PathLike, method: RegistrationMethod = RegistrationMethod.NETWORK) -> Self:
        checkpoint = load_checkpoint(path)
        return cls(UNet3D(checkpoint.config, checkpoint.params), method)

    def _register(self, patient: Volume3D) -> DisplacementField:
        return self.network.forward(patient, Mode.INFER)
