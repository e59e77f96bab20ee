from enum import StrEnum
from typing import NamedTuple

import numpy as np

from components.volumes import DisplacementField

__all__ = [
    "Reduction",
    "SmoothnessResult",
    "grad_smoothness",
    "grad_smoothness_grad",
]


class Reduction(StrEnum):
    SUM = "sum"
    MEAN = "mean"


class SmoothnessResult(NamedTuple):
    value: float
    degenerate: bool


def _difference_count(dims: tuple[int, int, int]) -> int:
    total = 0
    for axis, length in enumerate(dims):
        others = np.prod([n for index, n in enumerate(dims) if index != axis])
        total += (length - 1) * int(others)
    return total


def grad_smoothness(field: DisplacementField, reduction: Reduction = Reduction.MEAN) -> SmoothnessResult:
    """
    Sum of squared forward differences ``||u(i + e_a) - u(i)||^2`` over the three axes.
    Axes of length 1 contribute no terms; with no terms at all the value is 0 and flagged degenerate.

    :param field: The displacement field
    :param reduction: ``sum`` as written, or ``mean`` over the number of difference terms
    :return: The smoothness penalty and the degenerate flag
    """
    count = _difference_count(field.dims)
    if count == 0:
        return SmoothnessResult(value=0.0, degenerate=True)

    total = 0.0
    for axis in range(3):
        differences = np.diff(field.data, axis=axis)
        total += float(np.sum(differences ** 2))
    if Reduction(reduction) is Reduction.MEAN:
        total /= count
    return SmoothnessResult(value=total, degenerate=False)


def grad_smoothness_grad(field: DisplacementField, reduction: Reduction = Reduction.MEAN) -> np.ndarray:
    count = _difference_count(field.dims)
    gradient = np.zeros_like(field.data)
    if count == 0:
        return gradient

    for axis in range(3):
        differences = np.diff(field.data, axis=axis)
        head = [slice(None)] * 4
        tail = [slice(None)] * 4
        head[axis] = slice(1, None)
        tail[axis] = slice(None, -1)
        gradient[tuple(head)] += 2.0 * differences
        gradient[tuple(tail)] -= 2.0 * differences
    if Reduction(reduction) is Reduction.MEAN:
        gradient /= count
    return gradient
