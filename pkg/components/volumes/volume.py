from __future__ import annotations

from enum import StrEnum
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from components.errors import DimensionMismatchError

Spacing = tuple[float, float, float]


def _frozen_array(value, dtype) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


class GridModel(BaseModel):
    """
    Base for all voxel-grid value types: an array indexed ``[ix, iy, iz, ...]`` plus spacing in millimeters
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    @field_validator("spacing")
    @classmethod
    def validate_spacing(cls, spacing: Spacing) -> Spacing:
        if any(not np.isfinite(value) or value <= 0 for value in spacing):
            raise ValueError(f"Spacing must be finite and positive, got {spacing}")
        return tuple(float(value) for value in spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        nx, ny, nz = self.data.shape[:3]
        return int(nx), int(ny), int(nz)

    @property
    def voxel_count(self) -> int:
        return int(np.prod(self.dims))

    def require_same_grid(self, other: GridModel, context: str = "grid") -> None:
        if self.dims != other.dims:
            raise DimensionMismatchError(f"Mismatched {context} dimensions", self.dims, other.dims)


class Volume3D(GridModel):
    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, data) -> np.ndarray:
        array = _frozen_array(data, np.float64)
        if array.ndim != 3 or min(array.shape) < 1:
            raise ValueError(f"A volume must be a non-empty 3D array, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Volume data must be finite")
        return array

    def with_data(self, data: np.ndarray) -> Self:
        return type(self)(data=data, spacing=self.spacing)


class Mask3D(GridModel):
    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, data) -> np.ndarray:
        raw = np.asarray(data)
        if raw.ndim != 3 or min(raw.shape) < 1:
            raise ValueError(f"A mask must be a non-empty 3D array, got shape {raw.shape}")
        if raw.dtype != np.bool_ and not np.all((raw == 0) | (raw == 1)):
            raise ValueError("Mask values must be in {0, 1}")
        return _frozen_array(raw, np.bool_)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def is_empty(self) -> bool:
        return not self.data.any()

    def __and__(self, other: Mask3D) -> Mask3D:
        self.require_same_grid(other, "mask")
        return Mask3D(data=self.data & other.data, spacing=self.spacing)

    def __or__(self, other: Mask3D) -> Mask3D:
        self.require_same_grid(other, "mask")
        return Mask3D(data=self.data | other.data, spacing=self.spacing)

    def __sub__(self, other: Mask3D) -> Mask3D:
        self.require_same_grid(other, "mask")
        return Mask3D(data=self.data & ~other.data, spacing=self.spacing)

    def __invert__(self) -> Mask3D:
        return Mask3D(data=~self.data, spacing=self.spacing)

    def issubset(self, other: Mask3D) -> bool:
        self.require_same_grid(other, "mask")
        return not np.any(self.data & ~other.data)


class DisplacementField(GridModel):
    """
    Per-voxel displacement ``u`` in voxel units of the atlas grid, so that ``phi(x) = x + u(x)``
    """

    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, data) -> np.ndarray:
        array = _frozen_array(data, np.float64)
        if array.ndim != 4 or array.shape[3] != 3 or min(array.shape[:3]) < 1:
            raise ValueError(f"A displacement field must have shape (nx, ny, nz, 3), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Displacement field components must be finite")
        return array

    @classmethod
    def zeros(cls, dims: tuple[int, int, int], spacing: Spacing = (1.0, 1.0, 1.0)) -> Self:
        return cls(data=np.zeros((*dims, 3)), spacing=spacing)

    @classmethod
    def constant(cls, dims: tuple[int, int, int], vector, spacing: Spacing = (1.0, 1.0, 1.0)) -> Self:
        data = np.broadcast_to(np.asarray(vector, dtype=np.float64), (*dims, 3))
        return cls(data=data, spacing=spacing)

    def max_norm(self) -> float:
        return float(np.abs(self.data).max())


class Frame(StrEnum):
    ATLAS = "atlas"
    PATIENT = "patient"


class SurfaceMesh(BaseModel):
    """
    Triangle surface in voxel coordinates. Homologous meshes share vertex count and ordering.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vertices: np.ndarray
    triangles: np.ndarray
    frame: Frame = Frame.ATLAS

    @field_validator("vertices", mode="before")
    @classmethod
    def validate_vertices(cls, vertices) -> np.ndarray:
        array = _frozen_array(vertices, np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(array)):
            raise ValueError("Mesh vertices must be finite")
        return array

    @field_validator("triangles", mode="before")
    @classmethod
    def validate_triangles(cls, triangles) -> np.ndarray:
        return _frozen_array(triangles, np.int64).reshape(-1, 3)

    @model_validator(mode="after")
    def validate_connectivity(self) -> Self:
        if self.triangles.size == 0:
            return self
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise ValueError("Triangle indices must reference existing vertices")
        a, b, c = self.triangles.T
        if np.any((a == b) | (b == c) | (a == c)):
            raise ValueError("Degenerate triangle with repeated vertex index")
        return self

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def is_empty(self) -> bool:
        return self.vertex_count == 0 or len(self.triangles) == 0

    def with_vertices(self, vertices: np.ndarray, frame: Frame | None = None) -> Self:
        return type(self)(vertices=vertices, triangles=self.triangles, frame=frame or self.frame)

    def is_homologous(self, other: SurfaceMesh) -> bool:
        return self.vertex_count == other.vertex_count and np.array_equal(self.triangles, other.triangles)
