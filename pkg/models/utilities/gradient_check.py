"""
Finite-difference audits of every analytic gradient: the loss terms, each network layer, and the whole
network composed with the total loss. Shared by the test-suite and the ``gradcheck`` command.

Every check perturbs one entry at a time by ``+-h`` and compares the central difference with the analytic value
using ``|a - n| / max(|a|, |n|, 1e-6)``. Where the function is only piecewise smooth (rectifiers, pooling winners,
interpolation cells) a perturbation that changes the piece is skipped rather than compared.
"""
import logging
from enum import StrEnum
from typing import Callable, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import ndimage

from components.errors import GradientCheckError
from components.losses import (
    LossWeights,
    Reduction,
    grad_smoothness,
    grad_smoothness_grad,
    levelset_grad,
    levelset_loss,
    ncc_loss_and_grad,
    total_loss,
)
from components.transforms import identity_grid
from components.volumes import DisplacementField, Mask3D, Volume3D, dilate_sphere
from models.layers import (
    BatchNorm3d,
    Conv3d,
    Layer,
    LeakyReLU,
    MaxPool3d,
    Mode,
    UpsampleTrilinear,
    concat_skip_backward,
    concat_skip_forward,
)
from models.network_params import NetworkParams
from models.unet import NetConfig, UNet3D

__all__ = [
    "GradcheckScope",
    "GradientCheck",
    "GradientCheckReport",
    "relative_error",
    "check_gradient",
    "check_losses",
    "check_layers",
    "check_end_to_end",
    "run_gradcheck",
]

logger = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-6
LOSS_STEP = 1e-4
LAYER_STEP = 1e-5
NETWORK_STEP = 1e-5
LOSS_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4
NETWORK_SAMPLES = 64

Objective = Callable[[], float]
Signature = Callable[[], tuple[np.ndarray, ...]]


class GradcheckScope(StrEnum):
    LOSSES = "losses"
    LAYERS = "layers"
    END_TO_END = "end-to-end"


class GradientCheck(NamedTuple):
    name: str
    max_relative_error: float
    checked: int
    skipped: int


class GradientCheckReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    scope: GradcheckScope
    seed: int
    tolerance: float
    checks: list[GradientCheck]

    @property
    def max_relative_error(self) -> float:
        return max((check.max_relative_error for check in self.checks), default=0.0)

    @property
    def passed(self) -> bool:
        return sum(check.checked for check in self.checks) > 0 and self.max_relative_error < self.tolerance

    def summary(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} max_rel_err={self.max_relative_error:.3e}"

    def raise_for_failure(self) -> None:
        if not self.passed:
            worst = max(self.checks, key=lambda check: check.max_relative_error)
            raise GradientCheckError(
                f"Gradient check '{self.scope}' failed: worst '{worst.name}' at {worst.max_relative_error:.3e} "
                f"(tolerance {self.tolerance:.0e})",
                max_relative_error=self.max_relative_error,
            )


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def _same_signature(first: tuple[np.ndarray, ...], second: tuple[np.ndarray, ...]) -> bool:
    return len(first) == len(second) and all(np.array_equal(a, b) for a, b in zip(first, second))


def check_gradient(
        name: str,
        objective: Objective,
        array: np.ndarray,
        analytic: np.ndarray,
        indices: np.ndarray | None = None,
        step: float = LOSS_STEP,
        signature: Signature | None = None,
) -> GradientCheck:
    """
    Compare an analytic gradient with central differences of ``objective``, perturbing ``array`` in place.

    :param name: Label for logs and reports
    :param objective: Scalar function reading the current contents of ``array``
    :param array: The C-contiguous input being differentiated; restored after every perturbation
    :param analytic: The analytic gradient, same shape as ``array``
    :param indices: Flat indices to perturb; every entry if omitted
    :param step: The finite-difference step ``h``
    :param signature: Discrete state of the last ``objective`` call; perturbations that change it are skipped
    :return: The maximum relative error over the compared entries
    """
    if not array.flags.c_contiguous:
        raise ValueError(f"'{name}' must be C-contiguous to be perturbed in place")
    if analytic.shape != array.shape:
        raise ValueError(f"'{name}' gradient shape {analytic.shape} does not match {array.shape}")

    flat = array.reshape(-1)
    analytic_flat = np.asarray(analytic, dtype=np.float64).reshape(-1)
    indices = np.arange(flat.size) if indices is None else indices

    reference = signature() if signature is not None else ()
    worst = 0.0
    checked = skipped = 0
    for index in indices:
        original = flat[index]
        flat[index] = original + step
        plus = objective()
        plus_signature = signature() if signature is not None else ()
        flat[index] = original - step
        minus = objective()
        minus_signature = signature() if signature is not None else ()
        flat[index] = original

        if not (_same_signature(reference, plus_signature) and _same_signature(reference, minus_signature)):
            skipped += 1
            continue
        numeric = (plus - minus) / (2.0 * step)
        worst = max(worst, relative_error(float(analytic_flat[index]), numeric))
        checked += 1

    logger.debug("%s: max relative error %.3e over %d entries (%d skipped)", name, worst, checked, skipped)
    return GradientCheck(name=name, max_relative_error=worst, checked=checked, skipped=skipped)


# <editor-fold desc="Losses">

def _field_away_from_kinks(rng: np.random.Generator, dims: tuple[int, int, int]) -> np.ndarray:
    """
    Displacements whose fractional parts stay in (0.1, 0.9), so sample points never sit on a cell boundary
    """
    return np.ascontiguousarray(rng.integers(-1, 2, size=(*dims, 3)) + rng.uniform(0.1, 0.9, size=(*dims, 3)))


def _cube_masks(dims: tuple[int, int, int]) -> tuple[Mask3D, Mask3D]:
    foreground = np.zeros(dims, dtype=np.bool_)
    foreground[tuple(slice(n // 2 - 1, n // 2 + 1) for n in dims)] = True
    foreground = Mask3D(data=foreground)
    return foreground, dilate_sphere(foreground, 1.5)


def check_losses(seed: int = 0) -> list[GradientCheck]:
    rng = np.random.default_rng(seed)
    dims = (5, 6, 7)
    atlas = Volume3D(data=rng.normal(size=dims))
    foreground, band = _cube_masks(dims)
    checks = []

    warped = np.ascontiguousarray(rng.normal(size=dims))
    analytic = ncc_loss_and_grad(atlas, Volume3D(data=warped)).gradient
    checks.append(check_gradient(
        "ncc", lambda: ncc_loss_and_grad(atlas, Volume3D(data=warped)).loss, warped, analytic,
    ))

    for reduction in Reduction:
        field = np.ascontiguousarray(rng.normal(size=(*dims, 3)))
        analytic = grad_smoothness_grad(DisplacementField(data=field), reduction)
        checks.append(check_gradient(
            f"smoothness[{reduction}]",
            lambda: grad_smoothness(DisplacementField(data=field), reduction).value,
            field,
            analytic,
        ))

    warped = np.ascontiguousarray(rng.normal(size=dims))
    analytic = levelset_grad(Volume3D(data=warped), foreground, band)
    checks.append(check_gradient(
        "levelset", lambda: levelset_loss(Volume3D(data=warped), foreground, band), warped, analytic,
    ))

    patient = Volume3D(data=ndimage.gaussian_filter(rng.normal(size=dims), 1.0))
    field = _field_away_from_kinks(rng, dims)
    grid = identity_grid(dims)
    for name, weights in (("total", LossWeights()), ("total[no level-set]", LossWeights().without_levelset())):
        analytic = total_loss(atlas, patient, DisplacementField(data=field), foreground, band, weights).gradient
        checks.append(check_gradient(
            name,
            lambda: total_loss(atlas, patient, DisplacementField(data=field), foreground, band, weights).total,
            field,
            analytic,
            signature=lambda: (np.floor(grid + field),),
        ))
    return checks

# </editor-fold>

# <editor-fold desc="Layers">

def _check_layer(
        layer: Layer,
        params: NetworkParams,
        features: np.ndarray,
        rng: np.random.Generator,
        mode: Mode = Mode.TRAIN,
) -> list[GradientCheck]:
    features = np.ascontiguousarray(features)
    upstream = rng.normal(size=layer.forward(features, mode).shape)

    params.zero_grad()
    layer.forward(features, mode)
    analytic_input = layer.backward(upstream)
    analytic_params = {name: gradient.copy() for name, gradient in params.grads.items()}

    def objective() -> float:
        return float(np.sum(upstream * layer.forward(features, mode)))

    checks = [check_gradient(
        f"{layer.name}[{mode}].input", objective, features, analytic_input, step=LAYER_STEP, signature=layer.signature,
    )]
    for name, value in params.values.items():
        checks.append(check_gradient(
            f"{name}[{mode}]", objective, value, analytic_params[name], step=LAYER_STEP, signature=layer.signature,
        ))
    return checks


def check_layers(seed: int = 0) -> list[GradientCheck]:
    rng = np.random.default_rng(seed)
    checks = []

    params = NetworkParams()
    convolution = Conv3d("conv", 2, 3, 3, params, rng)
    params.values["conv.bias"][:] = rng.normal(size=3)
    checks += _check_layer(convolution, params, rng.normal(size=(2, 5, 4, 6)), rng)

    for mode in Mode:
        params = NetworkParams()
        normalization = BatchNorm3d("norm", 3, params)
        params.values["norm.scale"][:] = rng.uniform(0.5, 1.5, size=3)
        params.values["norm.shift"][:] = rng.normal(size=3)
        params.buffers["norm.running_mean"][:] = rng.normal(size=3)
        params.buffers["norm.running_var"][:] = rng.uniform(0.5, 2.0, size=3)
        checks += _check_layer(normalization, params, rng.normal(size=(3, 4, 4, 4)) * 2.0 + 0.5, rng, mode)

    checks += _check_layer(LeakyReLU("leaky_relu"), NetworkParams(), rng.normal(size=(2, 4, 4, 4)), rng)
    checks += _check_layer(MaxPool3d("pool"), NetworkParams(), rng.normal(size=(2, 4, 6, 4)), rng)
    checks += _check_layer(UpsampleTrilinear("upsample"), NetworkParams(), rng.normal(size=(2, 3, 2, 4)), rng)

    decoder = np.ascontiguousarray(rng.normal(size=(2, 3, 3, 3)))
    skip = np.ascontiguousarray(rng.normal(size=(3, 3, 3, 3)))
    upstream = rng.normal(size=(5, 3, 3, 3))
    analytic_decoder, analytic_skip = concat_skip_backward(upstream, decoder_channels=2)

    def concat_objective() -> float:
        return float(np.sum(upstream * concat_skip_forward(decoder, skip)))

    checks.append(check_gradient("concat.decoder", concat_objective, decoder, analytic_decoder, step=LAYER_STEP))
    checks.append(check_gradient("concat.skip", concat_objective, skip, analytic_skip, step=LAYER_STEP))
    return checks

# </editor-fold>

# <editor-fold desc="End to end">

def check_end_to_end(seed: int = 0, samples: int = NETWORK_SAMPLES) -> list[GradientCheck]:
    """
    Differentiate the total loss through a two-channel network on an 8x8x8 volume with respect to
    randomly sampled parameter entries. The head starts at a sizeable, off-grid displacement so that sample
    points spread across interpolation cells.
    """
    rng = np.random.default_rng(seed)
    dims = (8, 8, 8)
    config = NetConfig(input_dims=dims, base_channels=2, final_init_scale=0.1, seed=seed)
    network = UNet3D(config)
    network.params.values["head.bias"][:] = (0.37, -0.41, 0.29)
    for name, value in network.params.values.items():
        if name.endswith(".scale"):
            value[:] = rng.uniform(0.5, 1.5, size=value.shape)
        elif name.endswith(".shift"):
            value[:] = rng.uniform(-0.5, 0.5, size=value.shape)

    atlas = Volume3D(data=ndimage.gaussian_filter(rng.normal(size=dims), 1.0))
    patient = Volume3D(data=ndimage.gaussian_filter(rng.normal(size=dims), 1.0))
    foreground, band = _cube_masks(dims)
    grid = identity_grid(dims)
    last_field: list[np.ndarray] = []

    def objective() -> float:
        field = network.forward(patient, Mode.TRAIN)
        last_field[:] = [field.data]
        return total_loss(atlas, patient, field, foreground, band).total

    def signature() -> tuple[np.ndarray, ...]:
        return network.signature() + (np.floor(grid + last_field[0]),)

    network.zero_grad()
    field = network.forward(patient, Mode.TRAIN)
    last_field[:] = [field.data]
    network.backward(total_loss(atlas, patient, field, foreground, band).gradient)
    analytic = {name: gradient.copy() for name, gradient in network.params.grads.items()}

    names = network.params.names()
    sizes = np.array([network.params.values[name].size for name in names])
    chosen = np.sort(rng.choice(sizes.sum(), size=min(samples, int(sizes.sum())), replace=False))
    owners = np.searchsorted(np.cumsum(sizes), chosen, side="right")
    offsets = chosen - np.concatenate([[0], np.cumsum(sizes)])[owners]

    checks = []
    for owner in np.unique(owners):
        name = names[owner]
        checks.append(check_gradient(
            f"network.{name}",
            objective,
            network.params.values[name],
            analytic[name],
            indices=offsets[owners == owner],
            step=NETWORK_STEP,
            signature=signature,
        ))
    return checks

# </editor-fold>


def run_gradcheck(scope: GradcheckScope, seed: int = 0) -> GradientCheckReport:
    scope = GradcheckScope(scope)
    match scope:
        case GradcheckScope.LOSSES:
            checks, tolerance = check_losses(seed), LOSS_TOLERANCE
        case GradcheckScope.LAYERS:
            checks, tolerance = check_layers(seed), LOSS_TOLERANCE
        case GradcheckScope.END_TO_END:
            checks, tolerance = check_end_to_end(seed), NETWORK_TOLERANCE

    report = GradientCheckReport(scope=scope, seed=seed, tolerance=tolerance, checks=checks)
    logger.info("Gradient check %s (seed %d): %s", scope, seed, report.summary())
    return report
