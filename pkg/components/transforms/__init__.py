from components.transforms.sampling import TrilinearSample, sample_trilinear, identity_grid
from components.transforms.warps import (
    SampleJacobian,
    PullbackResult,
    pullback,
    pullback_grad,
    pullback_mask,
    warp_mesh,
    splat_mask,
)

__all__ = [
    "TrilinearSample",
    "sample_trilinear",
    "identity_grid",

    "SampleJacobian",
    "PullbackResult",
    "pullback",
    "pullback_grad",
    "pullback_mask",
    "warp_mesh",
    "splat_mask",
]
