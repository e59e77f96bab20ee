from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

__all__ = [
    "EllipsoidSpec",
    "WarpSpec",
    "PhantomSpec",
]

Vector = tuple[float, float, float]


class EllipsoidSpec(BaseModel):
    """
    An axis-aligned ellipsoid placed relative to the shape center, in voxels
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    offset: Vector = (0.0, 0.0, 0.0)
    radii: Vector

    @field_validator("radii")
    @classmethod
    def validate_radii(cls, radii: Vector) -> Vector:
        if min(radii) <= 0:
            raise ValueError(f"Radii must be positive, got {radii}")
        return radii

    def contains_center(self) -> bool:
        return float(np.sum((np.array(self.offset) / np.array(self.radii)) ** 2)) < 1.0

    def extent(self) -> np.ndarray:
        return np.abs(np.array(self.offset)) + np.array(self.radii)


class WarpSpec(BaseModel):
    """
    A global translation plus Gaussian displacement bumps. A fixed ``translation`` overrides the random one.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    bumps: int = Field(default=4, ge=0)
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    sigma_range: tuple[float, float] = (6.0, 10.0)
    center_spread: float = Field(default=10.0, ge=0.0)
    translation: Vector | None = None
    translation_range: float = Field(default=1.0, ge=0.0)
    max_gradient: float = Field(default=0.5, gt=0.0, lt=1.0)

    @field_validator("amplitude_range", "sigma_range")
    @classmethod
    def validate_range(cls, bounds: tuple[float, float]) -> tuple[float, float]:
        low, high = bounds
        if low < 0 or high < low:
            raise ValueError(f"A range needs 0 <= low <= high, got {bounds}")
        return bounds

    @model_validator(mode="after")
    def validate_sigma(self) -> Self:
        if self.bumps > 0 and self.sigma_range[0] <= 0:
            raise ValueError("Bump sigmas must be positive")
        return self

    @classmethod
    def identity(cls) -> Self:
        return cls(bumps=0, translation=(0.0, 0.0, 0.0))


def _default_ellipsoids() -> tuple[EllipsoidSpec, ...]:
    return (
        EllipsoidSpec(name="body", offset=(0.0, 0.0, 0.0), radii=(7.0, 5.0, 4.0)),
        EllipsoidSpec(name="process", offset=(0.0, 6.0, -1.0), radii=(2.5, 8.0, 2.5)),
        EllipsoidSpec(name="footplate", offset=(3.0, -2.0, 1.0), radii=(7.0, 3.5, 3.0)),
    )


class PhantomSpec(BaseModel):
    """
    Synthetic ossicle-like atlas and patient generation settings. Lengths are in voxels, spacing in millimeters.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    dims: tuple[int, int, int] = (64, 76, 44)
    spacing: Vector = (0.2, 0.2, 0.2)
    center: Vector | None = None
    ellipsoids: tuple[EllipsoidSpec, ...] = Field(default_factory=_default_ellipsoids)
    background_intensity: float = 0.0
    bone_intensity: float = 0.7
    structure_intensity: float = 1.0
    smoothing_sigma: float = Field(default=0.8, ge=0.0)
    distractors: int = Field(default=4, ge=0)
    distractor_radius: float = Field(default=3.0, gt=0.0)
    distractor_clearance: float = Field(default=5.0, ge=0.0)
    noise_fraction: float = Field(default=0.02, ge=0.0)
    bias_amplitude: float = Field(default=0.05, ge=0.0)
    warp: WarpSpec = WarpSpec()
    mesh_subdivision: int = Field(default=3, ge=0, le=6)
    margin: int = Field(default=4, ge=0)
    seed: int = 0

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, dims: tuple[int, int, int]) -> tuple[int, int, int]:
        if min(dims) < 1:
            raise ValueError(f"Dims must be positive, got {dims}")
        return dims

    @field_validator("spacing")
    @classmethod
    def validate_spacing(cls, spacing: Vector) -> Vector:
        if min(spacing) <= 0:
            raise ValueError(f"Spacing must be positive, got {spacing}")
        return spacing

    @model_validator(mode="after")
    def validate_shape(self) -> Self:
        if not self.ellipsoids:
            raise ValueError("The shape needs at least one ellipsoid")
        for ellipsoid in self.ellipsoids:
            if not ellipsoid.contains_center():
                raise ValueError(f"Ellipsoid '{ellipsoid.name}' must contain the shape center")
        extent = np.max([ellipsoid.extent() for ellipsoid in self.ellipsoids], axis=0)
        center = self.shape_center
        low = center - extent
        high = center + extent
        if np.any(low < self.margin) or np.any(high > np.array(self.dims) - 1 - self.margin):
            raise ValueError(f"The shape does not fit the grid with a {self.margin}-voxel margin")
        return self

    @property
    def shape_center(self) -> np.ndarray:
        if self.center is not None:
            return np.array(self.center, dtype=np.float64)
        return (np.array(self.dims, dtype=np.float64) - 1.0) / 2.0

    @property
    def contrast(self) -> float:
        return abs(self.structure_intensity - self.background_intensity)
