import itertools
import logging
import math
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

__all__ = [
    "WilcoxonMode",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "BoxPlotSummary",
    "box_plot_summary",
]

logger = logging.getLogger(__name__)

EXACT_MAX_PAIRS = 12
MIN_PAIRS = 5


class WilcoxonMode(StrEnum):
    AUTO = "auto"
    EXACT = "exact"
    NORMAL = "normal"


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    n: int
    mode: WilcoxonMode
    degenerate: bool = False


def _exact_p_value(ranks: np.ndarray, statistic: float) -> float:
    """
    Two-sided p-value by enumerating all ``2**n`` sign assignments of the (average) ranks
    """
    total = ranks.sum()
    signs = np.array(list(itertools.product((0.0, 1.0), repeat=len(ranks))))
    positive = signs @ ranks
    smaller = np.minimum(positive, total - positive)
    return float(np.count_nonzero(smaller <= statistic + 1e-9) / len(signs))


def _normal_p_value(ranks: np.ndarray, statistic: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    if variance <= 0.0:
        return 1.0
    z = (abs(statistic - mean) - 0.5) / math.sqrt(variance)
    return float(min(1.0, 2.0 * stats.norm.sf(max(z, 0.0))))


def wilcoxon_signed_rank(differences, mode: WilcoxonMode = WilcoxonMode.AUTO) -> WilcoxonResult:
    """
    Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped; absolute differences are ranked with average ranks for ties and
    ``W = min(W+, W-)``. ``auto`` enumerates exactly up to 12 pairs and otherwise uses the normal approximation
    with tie-corrected variance and continuity correction.

    :param differences: Paired differences
    :param mode: ``auto``, ``exact`` or ``normal``
    :return: The statistic, p-value, number of non-zero pairs, the mode used and the degenerate flag
    """
    mode = WilcoxonMode(mode)
    differences = np.asarray(differences, dtype=np.float64).ravel()
    if not np.all(np.isfinite(differences)):
        raise ValueError("Differences must be finite")
    nonzero = differences[differences != 0.0]
    n = len(nonzero)

    if n == 0:
        logger.warning("All %d paired differences are zero; the signed-rank test is degenerate", len(differences))
        return WilcoxonResult(statistic=0.0, p_value=1.0, n=0, mode=mode, degenerate=True)
    if n < MIN_PAIRS:
        raise ValueError(f"The signed-rank test needs at least {MIN_PAIRS} non-zero differences, got {n}")

    ranks = stats.rankdata(np.abs(nonzero))
    positive = float(ranks[nonzero > 0].sum())
    negative = float(ranks[nonzero < 0].sum())
    statistic = min(positive, negative)

    if mode is WilcoxonMode.AUTO:
        mode = WilcoxonMode.EXACT if n <= EXACT_MAX_PAIRS else WilcoxonMode.NORMAL
    if mode is WilcoxonMode.EXACT:
        if n > 20:
            raise ValueError(f"Exact enumeration over 2**{n} sign assignments is not supported")
        p_value = _exact_p_value(ranks, statistic)
    else:
        p_value = _normal_p_value(ranks, statistic)
    return WilcoxonResult(statistic=statistic, p_value=p_value, n=n, mode=mode)


class BoxPlotSummary(BaseModel):
    """
    Five-number summary with linearly interpolated quartiles and whiskers at the most extreme values
    within 1.5 IQR of the quartiles
    """
    model_config = ConfigDict(frozen=True)

    count: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list[float]


def box_plot_summary(values) -> BoxPlotSummary:
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if values.size == 0:
        raise ValueError("A box plot needs at least one value")
    q1, median, q3 = np.percentile(values, [25, 50, 75], method="linear")
    spread = 1.5 * (q3 - q1)
    inside = values[(values >= q1 - spread) & (values <= q3 + spread)]
    outliers = values[(values < q1 - spread) | (values > q3 + spread)]
    return BoxPlotSummary(
        count=int(values.size),
        mean=float(values.mean()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=[float(value) for value in outliers],
    )
