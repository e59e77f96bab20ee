from phantoms.spec import EllipsoidSpec, WarpSpec, PhantomSpec
from phantoms.shapes import icosphere, ellipsoid_quadratic, inside_shape, radial_surface
from phantoms.warps import GaussianWarp
from phantoms.generator import PhantomAtlas, PhantomCase, make_atlas, make_case, write_dataset

__all__ = [
    "EllipsoidSpec",
    "WarpSpec",
    "PhantomSpec",

    "icosphere",
    "ellipsoid_quadratic",
    "inside_shape",
    "radial_surface",

    "GaussianWarp",

    "PhantomAtlas",
    "PhantomCase",
    "make_atlas",
    "make_case",
    "write_dataset",
]
