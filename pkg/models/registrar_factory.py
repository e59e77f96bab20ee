import warnings
from os import PathLike

from components.losses import LossWeights
from components.volumes import Mask3D, Volume3D
from models.direct_registrar import DirectRegistrar
from models.network_registrar import NetworkRegistrar
from models.registrar import Registrar
from models.utilities.registration_method import RegistrationMethod


class RegistrarFactory:
    default_method = RegistrationMethod.NETWORK

    @classmethod
    def get_registrar(
            cls,
            method: str | RegistrationMethod,
            checkpoint: str | PathLike | None = None,
            atlas: Volume3D | None = None,
            foreground: Mask3D | None = None,
            band: Mask3D | None = None,
            weights: LossWeights | None = None,
            **kwargs
    ) -> Registrar:
        """
        :param method: A registration method or a tag containing one (e.g. ``"network-best"``)
        :param checkpoint: The trained network, for the network and ablation methods
        :param atlas: The atlas volume, for the direct method
        :param foreground: The atlas structure mask, for the direct method
        :param band: The dilated structure mask, for the direct method
        :param weights: Loss weights for the direct method
        :return: The registrar
        """
        try:
            method = RegistrationMethod.infer_method(str(method))
        except ValueError:
            warnings.warn(f"Could not infer a registration method from '{method}'. Defaults to {cls.default_method}")
            method = cls.default_method

        if not method.uses_network:
            if atlas is None or foreground is None or band is None:
                raise ValueError("Direct registration needs the atlas volume, its mask and its band")
            return DirectRegistrar(atlas, foreground, band, weights or LossWeights(), **kwargs)

        if checkpoint is None:
            raise ValueError(f"The {method} method needs a checkpoint")
        return NetworkRegistrar.from_checkpoint(checkpoint, method)
