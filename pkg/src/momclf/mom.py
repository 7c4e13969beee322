"""Median-of-means estimation of a scalar mean over partition blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from momclf.data import Partition


@dataclass(frozen=True)
class BlockMeans:
    """The K within-block arithmetic means of a per-sample value vector."""

    means: np.ndarray
    partition: Partition


def _median_rank(k: int) -> int:
    # middle order statistic for odd k, lower median for even k, so a
    # concrete block always attains the returned value
    return (k - 1) // 2


def block_means(values, partition: Partition) -> BlockMeans:
    """Mean of ``values`` over each partition block.

    Values must cover every index the partition uses.  Within-block
    summation runs in ascending index order (blocks are stored sorted),
    keeping results bitwise deterministic.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValueError("values must be a 1-d vector")
    if values.size < partition.n:
        raise ValueError(
            f"values has {values.size} entries, partition indexes up to {partition.n - 1}"
        )
    return BlockMeans(means=values[partition.blocks].mean(axis=1), partition=partition)


def mom_estimate(values, partition: Partition) -> float:
    """Median of the within-block means (the lower median when K is even)."""
    means = block_means(values, partition).means
    r = _median_rank(means.size)
    return float(np.partition(means, r)[r])


def median_block_index(bm: BlockMeans) -> int:
    """Index of a block whose mean attains the MOM value.

    Ties are broken toward the smallest block index, so the result is a
    deterministic function of the partition and values.
    """
    means = bm.means
    r = _median_rank(means.size)
    med = np.partition(means, r)[r]
    return int(np.flatnonzero(means == med)[0])
