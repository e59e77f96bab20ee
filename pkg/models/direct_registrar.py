from components.losses import LossWeights, Reduction
from components.volumes import DisplacementField, Mask3D, Volume3D
from engine.direct import optimize_direct
from models.registrar import Registrar
from models.utilities.registration_method import RegistrationMethod

__all__ = [
    "DirectRegistrar",
]


class DirectRegistrar(Registrar):
    """
    Per-pair registration: optimizes the displacement field itself against the total loss, no network involved
    """

    def __init__(
            self,
            atlas: Volume3D,
            foreground: Mask3D,
            band: Mask3D,
            weights: LossWeights = LossWeights(),
            steps: int = 200,
            lr: float = 0.05,
            reduction: Reduction = Reduction.MEAN,
    ):
        super().__init__(RegistrationMethod.DIRECT)
        self.atlas = atlas
        self.foreground = foreground
        self.band = band
        self.weights = weights
        self.steps = steps
        self.lr = lr
        self.reduction = reduction

    def _register(self, patient: Volume3D) -> DisplacementField:
        return optimize_direct(
            patient,
            self.atlas,
            self.foreground,
            self.band,
            weights=self.weights,
            steps=self.steps,
            lr=self.lr,
            reduction=self.reduction,
        ).field
