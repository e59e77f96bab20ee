import math
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from components.losses.levelset import levelset_grad, levelset_loss
from components.losses.similarity import ncc_loss_and_grad
from components.losses.smoothness import Reduction, grad_smoothness, grad_smoothness_grad
from components.transforms import pullback, pullback_grad
from components.volumes import DisplacementField, Mask3D, Volume3D

__all__ = [
    "LossWeights",
    "LossBreakdown",
    "total_loss",
]


class LossWeights(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_cc: float = Field(default=0.1, ge=0.0)
    lambda_gd: float = Field(default=0.85, ge=0.0)
    lambda_ls: float = Field(default=0.05, ge=0.0)

    @model_validator(mode="after")
    def validate_any_positive(self) -> Self:
        if max(self.lambda_cc, self.lambda_gd, self.lambda_ls) <= 0.0:
            raise ValueError("At least one loss weight must be positive")
        return self

    def without_levelset(self) -> Self:
        return self.model_copy(update={"lambda_ls": 0.0})


class LossBreakdown(BaseModel):
    """
    The three loss terms, their weighted total and the total's gradient with respect to the displacement field.
    ``cc`` is the minimized correlation term ``-cc_similarity``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cc_similarity: float
    cc: float
    gd: float
    ls: float
    total: float
    weights: LossWeights
    gradient: np.ndarray = Field(repr=False)
    cc_degenerate: bool = False
    gd_degenerate: bool = False

    def is_finite(self) -> bool:
        return all(math.isfinite(value) for value in (self.cc, self.gd, self.ls, self.total))

    def as_row(self) -> dict[str, float]:
        return dict(
            cc_similarity=self.cc_similarity,
            cc=self.cc,
            gd=self.gd,
            ls=self.ls,
            total=self.total,
        )


def total_loss(
        atlas: Volume3D,
        patient: Volume3D,
        field: DisplacementField,
        foreground: Mask3D,
        band: Mask3D,
        weights: LossWeights = LossWeights(),
        reduction: Reduction = Reduction.MEAN,
) -> LossBreakdown:
    """
    Pull the patient back through the field and evaluate
    ``lambda_cc * (-ncc) + lambda_gd * smoothness + lambda_ls * level-set``.
    The level-set term is always evaluated so that it can be logged when its weight is 0.

    :param atlas: The atlas volume ``m``
    :param patient: The patient volume ``p``
    :param field: The displacement field on the atlas grid
    :param foreground: The atlas structure mask
    :param band: The dilated structure mask
    :param weights: The three loss weights
    :param reduction: Reduction of the smoothness term
    :return: The loss breakdown with the gradient with respect to the field
    """
    atlas.require_same_grid(field, "atlas/field")
    warped, jacobian = pullback(patient, field)

    correlation = ncc_loss_and_grad(atlas, warped)
    smoothness = grad_smoothness(field, reduction)
    levelset = levelset_loss(warped, foreground, band)

    total = (
            weights.lambda_cc * correlation.loss
            + weights.lambda_gd * smoothness.value
            + weights.lambda_ls * levelset
    )

    image_gradient = weights.lambda_cc * correlation.gradient
    if weights.lambda_ls > 0.0:
        image_gradient = image_gradient + weights.lambda_ls * levelset_grad(warped, foreground, band)
    gradient = pullback_grad(image_gradient, jacobian)
    if weights.lambda_gd > 0.0:
        gradient = gradient + weights.lambda_gd * grad_smoothness_grad(field, reduction)

    return LossBreakdown(
        cc_similarity=-correlation.loss,
        cc=correlation.loss,
        gd=smoothness.value,
        ls=levelset,
        total=float(total),
        weights=weights,
        gradient=gradient,
        cc_degenerate=correlation.degenerate,
        gd_degenerate=smoothness.degenerate,
    )
