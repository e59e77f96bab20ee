from models.network_params import NetworkParams
from models.unet import NetConfig, UNet3D
from models.checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from models.registrar import Registrar, Segmentation
from models.network_registrar import NetworkRegistrar
from models.direct_registrar import DirectRegistrar
from models.registrar_factory import RegistrarFactory

__all__ = [
    "NetworkParams",
    "NetConfig",
    "UNet3D",

    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",

    "Registrar",
    "Segmentation",
    "NetworkRegistrar",
    "DirectRegistrar",

    "RegistrarFactory"
]
