import logging
from typing import NamedTuple

import numpy as np

from components.errors import NonFiniteLossError
from components.losses import LossWeights, Reduction, total_loss
from components.volumes import DisplacementField, Mask3D, Volume3D
from models.network_params import NetworkParams
from models.optimizers import Adam

__all__ = [
    "DirectResult",
    "optimize_direct",
]

logger = logging.getLogger(__name__)

DISPLACEMENT = "displacement"


class DirectResult(NamedTuple):
    field: DisplacementField
    trace: list[dict[str, float]]
    best_step: int


def optimize_direct(
        patient: Volume3D,
        atlas: Volume3D,
        foreground: Mask3D,
        band: Mask3D,
        weights: LossWeights = LossWeights(),
        steps: int = 200,
        lr: float = 0.05,
        reduction: Reduction = Reduction.MEAN,
        case_id: str | None = None,
) -> DirectResult:
    """
    Fit a displacement field to one patient by running Adam on the field itself, starting from ``u = 0``.

    :param patient: The patient volume
    :param atlas: The atlas volume
    :param foreground: The atlas structure mask
    :param band: The dilated structure mask
    :param weights: The loss weights
    :param steps: Number of Adam updates
    :param lr: The Adam learning rate
    :param reduction: Reduction of the smoothness term
    :param case_id: Reported when the loss becomes non-finite
    :return: The iterate with the lowest total loss, the per-iterate loss trace (``steps + 1`` rows)
    and the index of the returned iterate
    """
    if steps < 0:
        raise ValueError(f"Steps must be non-negative, got {steps}")
    patient.require_same_grid(atlas, "patient/atlas")

    params = NetworkParams()
    displacement = params.add(DISPLACEMENT, np.zeros((*atlas.dims, 3)))
    optimizer = Adam(lr=lr)

    trace = []
    best_total = np.inf
    best_step = 0
    best_field = DisplacementField.zeros(atlas.dims, atlas.spacing)
    for step in range(steps + 1):
        if not np.all(np.isfinite(displacement)):
            raise NonFiniteLossError(
                f"Non-finite displacement at direct optimization step {step}",
                case_id=case_id,
                breakdown=trace[-1] if trace else None,
            )
        field = DisplacementField(data=displacement, spacing=atlas.spacing)
        breakdown = total_loss(atlas, patient, field, foreground, band, weights, reduction)
        if not breakdown.is_finite():
            raise NonFiniteLossError(
                f"Non-finite loss at direct optimization step {step}", case_id=case_id, breakdown=breakdown.as_row(),
            )
        trace.append(dict(step=step, **breakdown.as_row()))
        if breakdown.total < best_total:
            best_total, best_step, best_field = breakdown.total, step, field

        if step == steps:
            break
        params.zero_grad()
        params.accumulate(DISPLACEMENT, breakdown.gradient)
        optimizer.step(params)

    logger.info(
        "Direct optimization%s: total %.6f -> %.6f (best at step %d)",
        f" of {case_id}" if case_id else "", trace[0]["total"], best_total, best_step,
    )
    return DirectResult(field=best_field, trace=trace, best_step=best_step)
