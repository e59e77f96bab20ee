import logging
import math
import warnings
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from phantoms.spec import Vector, WarpSpec

__all__ = [
    "GaussianWarp",
]

logger = logging.getLogger(__name__)

INVERSE_TOLERANCE = 1e-9
INVERSE_MAX_ITERATIONS = 200


class GaussianWarp(BaseModel):
    """
    An analytic smooth warp ``W(x) = x + t + sum_k a_k * exp(-|x - c_k|^2 / (2 s_k^2))`` in voxel coordinates.

    With a displacement gradient bound below 1 the warp is injective and its inverse is the unique fixed point
    of ``x = y - d(x)``.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    translation: Vector = (0.0, 0.0, 0.0)
    centers: tuple[Vector, ...] = ()
    amplitudes: tuple[Vector, ...] = ()
    sigmas: tuple[float, ...] = ()

    @model_validator(mode="after")
    def validate_bumps(self) -> Self:
        if not len(self.centers) == len(self.amplitudes) == len(self.sigmas):
            raise ValueError("Every bump needs a center, an amplitude and a sigma")
        if any(sigma <= 0 for sigma in self.sigmas):
            raise ValueError(f"Bump sigmas must be positive, got {self.sigmas}")
        return self

    @classmethod
    def sample(cls, spec: WarpSpec, center: np.ndarray, rng: np.random.Generator) -> Self:
        """
        Draw a random warp around a shape center, rescaling the bumps when the gradient bound is too large

        :param spec: The warp distribution
        :param center: The shape center in voxels
        :param rng: The case generator
        :return: A warp whose gradient bound is below ``spec.max_gradient``
        """
        if spec.translation is not None:
            translation = np.array(spec.translation, dtype=np.float64)
        else:
            translation = rng.uniform(-spec.translation_range, spec.translation_range, size=3)

        centers = center + rng.uniform(-spec.center_spread, spec.center_spread, size=(spec.bumps, 3))
        directions = rng.normal(size=(spec.bumps, 3))
        directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-12)
        magnitudes = rng.uniform(*spec.amplitude_range, size=spec.bumps)
        sigmas = rng.uniform(*spec.sigma_range, size=spec.bumps)
        warp = cls(
            translation=tuple(translation),
            centers=tuple(map(tuple, centers)),
            amplitudes=tuple(map(tuple, directions * magnitudes[:, None])),
            sigmas=tuple(sigmas),
        )

        bound = warp.gradient_bound()
        if bound >= spec.max_gradient:
            factor = 0.99 * spec.max_gradient / bound
            message = f"Warp gradient bound {bound:.3f} exceeds {spec.max_gradient}; rescaling bump amplitudes by {factor:.3f}"
            logger.warning(message)
            warnings.warn(message)
            warp = warp.scaled(factor)
        return warp

    def scaled(self, factor: float) -> Self:
        amplitudes = np.array(self.amplitudes).reshape(-1, 3) * factor
        return self.model_copy(update={"amplitudes": tuple(map(tuple, amplitudes))})

    def gradient_bound(self) -> float:
        """
        Upper bound on the spectral norm of the displacement jacobian: ``sum_k |a_k| / s_k * e^{-1/2}``
        """
        return sum(
            float(np.linalg.norm(amplitude)) / sigma * math.exp(-0.5)
            for amplitude, sigma in zip(self.amplitudes, self.sigmas)
        )

    def displacement(self, points: np.ndarray) -> np.ndarray:
        displacement = np.broadcast_to(np.array(self.translation), points.shape).copy()
        for center, amplitude, sigma in zip(self.centers, self.amplitudes, self.sigmas):
            offset = points - np.array(center)
            weight = np.exp(-np.sum(offset * offset, axis=-1) / (2.0 * sigma * sigma))
            displacement += weight[..., None] * np.array(amplitude)
        return displacement

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points + self.displacement(points)

    def inverse(self, points: np.ndarray, tolerance: float = INVERSE_TOLERANCE) -> np.ndarray:
        """
        Invert the warp by fixed-point iteration ``x <- y - d(x)``

        :param points: Patient-space points ``(..., 3)``
        :param tolerance: Maximum residual ``|W(x) - y|`` in voxels
        :return: Atlas-space points
        """
        if self.gradient_bound() >= 1.0:
            raise ValueError("The warp is not a contraction; its inverse is not guaranteed")
        estimate = points - np.array(self.translation)
        for iteration in range(INVERSE_MAX_ITERATIONS):
            residual = np.max(np.linalg.norm(self.apply(estimate) - points, axis=-1), initial=0.0)
            if residual < tolerance:
                logger.debug("Warp inverse converged after %d iterations (residual %.2e)", iteration, residual)
                return estimate
            estimate = points - self.displacement(estimate)
        raise RuntimeError(f"Warp inverse did not converge in {INVERSE_MAX_ITERATIONS} iterations")
