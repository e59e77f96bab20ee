import logging
import math
from typing import NamedTuple

import numpy as np

from components.volumes import Mask3D, dilate_sphere
from engine.manifest import CaseRecord, DatasetManifest

__all__ = [
    "DatasetSplit",
    "split_sizes",
    "split_dataset",
    "precompute_band",
]

logger = logging.getLogger(__name__)


class DatasetSplit(NamedTuple):
    train: list[CaseRecord]
    val: list[CaseRecord]
    test: list[CaseRecord]


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5 + 1e-9))


def split_sizes(count: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """
    Train and validation sizes are rounded (halves up); the test partition takes the remainder
    """
    train = _round_half_up(fractions[0] * count)
    val = _round_half_up(fractions[1] * count)
    test = count - train - val
    if test < 0:
        raise ValueError(f"Fractions {fractions} overflow {count} cases")
    for size, fraction, name in zip((train, val, test), fractions, ("train", "val", "test")):
        if fraction > 0 and size == 0:
            raise ValueError(f"{count} cases leave the {name} partition empty")
    return train, val, test


def split_dataset(manifest: DatasetManifest, seed: int | None = None) -> DatasetSplit:
    """
    Shuffle the cases with a seeded generator and cut them into train, validation and test partitions

    :param manifest: The dataset
    :param seed: Overrides the manifest's seed
    :return: Disjoint partitions covering every case
    """
    count = len(manifest.cases)
    if count < 3:
        raise ValueError(f"Splitting needs at least 3 cases, got {count}")
    seed = manifest.seed if seed is None else seed
    train_size, val_size, _ = split_sizes(count, manifest.split_fractions)

    order = np.random.default_rng(seed).permutation(count)
    cases = [manifest.cases[index] for index in order]
    split = DatasetSplit(
        train=cases[:train_size],
        val=cases[train_size:train_size + val_size],
        test=cases[train_size + val_size:],
    )
    logger.info("Split %d cases with seed %d into %d/%d/%d", count, seed, *map(len, split))
    return split


def precompute_band(foreground: Mask3D, radius: float = 3.0) -> Mask3D:
    """
    The band ``mu``: the atlas mask dilated by a ball of ``radius`` voxels
    """
    return dilate_sphere(foreground, radius)
