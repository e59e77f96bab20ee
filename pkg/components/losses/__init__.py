from components.losses.similarity import NccResult, NccLoss, ncc, ncc_loss_and_grad
from components.losses.smoothness import Reduction, SmoothnessResult, grad_smoothness, grad_smoothness_grad
from components.losses.levelset import levelset_loss, levelset_grad
from components.losses.composite import LossWeights, LossBreakdown, total_loss

__all__ = [
    "NccResult",
    "NccLoss",
    "ncc",
    "ncc_loss_and_grad",

    "Reduction",
    "SmoothnessResult",
    "grad_smoothness",
    "grad_smoothness_grad",

    "levelset_loss",
    "levelset_grad",

    "LossWeights",
    "LossBreakdown",
    "total_loss",
]
