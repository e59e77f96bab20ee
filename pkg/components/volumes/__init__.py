from components.volumes.volume import (
    GridModel,
    Volume3D,
    Mask3D,
    DisplacementField,
    SurfaceMesh,
    Frame,
)
from components.volumes.io import (
    read_volume,
    write_volume,
    read_mask,
    write_mask,
    read_field,
    write_field,
    read_mesh,
    write_mesh,
)
from components.volumes.morphology import (
    dilate_sphere,
    spherical_structuring_element,
    mask_and,
    mask_or,
    mask_not,
    mask_sub,
)

__all__ = [
    "GridModel",
    "Volume3D",
    "Mask3D",
    "DisplacementField",
    "SurfaceMesh",
    "Frame",

    "read_volume",
    "write_volume",
    "read_mask",
    "write_mask",
    "read_field",
    "write_field",
    "read_mesh",
    "write_mesh",

    "dilate_sphere",
    "spherical_structuring_element",
    "mask_and",
    "mask_or",
    "mask_not",
    "mask_sub",
]
