"""Counting and enumerating three-group configurations.

A configuration splits ``n`` labelled items into three unlabelled groups
where at most one group is a singleton and every other group has at
least two members.
"""

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from uclust3.exceptions import DataError
from uclust3.ustat import Partition3

MAX_ENUMERATION_N = 14


def two_group_count(n: int) -> int:
    """Number of splits of ``n`` items into two groups of size >= 2."""
    if n < 4:
        return 0
    return 2 ** (n - 1) - n - 1


def singleton_count(n: int) -> int:
    """Number of three-group configurations with exactly one singleton."""
    if n < 5:
        return 0
    return (2 ** (n - 2) - n) * n


def nonunit_count(n: int) -> int:
    """Number of three-group configurations with every group of size >= 2.

    Built from the recursion ``S(n+1) = 3 S(n) + singleton_count(n)``
    starting at ``S(6) = 15``.
    """
    if n < 6:
        return 0
    s = 15
    for m in range(6, n):
        s = 3 * s + singleton_count(m)
    return s


def nonunit_count_closed(n: int) -> int:
    """Closed form of :func:`nonunit_count`, valid for ``n >= 6``."""
    num = 3 ** (n - 1) - (n + 2) * 2 ** (n - 1) + n * n + n + 1
    return num // 2


@dataclass(frozen=True)
class PartitionCount:
    n: int
    s3: int
    delta3: int
    gamma3: int
    log_gamma3: float


def _log_int(value: int) -> float:
    # math.log accepts arbitrarily large ints, but keep precision for big ones
    bits = value.bit_length()
    if bits <= 1000:
        return math.log(value)
    shift = bits - 60
    return math.log(value >> shift) + shift * math.log(2)


def total_count(n: int) -> PartitionCount:
    """All legal three-group configurations of ``n`` items (at most one singleton)."""
    if n < 5:
        raise DataError(f"three-group configurations need n >= 5, got {n}")
    s3 = nonunit_count(n)
    d3 = singleton_count(n)
    g3 = s3 + d3
    return PartitionCount(n=n, s3=s3, delta3=d3, gamma3=g3, log_gamma3=_log_int(g3))


def _canonical_rows(raw: np.ndarray) -> np.ndarray:
    """Relabel each row so groups are ordered by (size, smallest member)."""
    m, n = raw.shape
    sizes = np.stack([(raw == g).sum(axis=1) for g in range(3)], axis=1)
    first = np.stack([np.argmax(raw == g, axis=1) for g in range(3)], axis=1)
    key = sizes * (n + 1) + first
    rank = np.argsort(np.argsort(key, axis=1, kind="stable"), axis=1, kind="stable")
    return np.take_along_axis(rank, raw.astype(np.intp), axis=1).astype(np.int8)


def partition_array(n: int, allow_singleton: bool = True) -> np.ndarray:
    """All legal configurations as a ``(count, n)`` array of 0-based labels.

    Rows are in canonical labelling (group 0 is the smallest group, ties
    broken by smallest member) and appear in restricted-growth order.
    """
    if not 5 <= n <= MAX_ENUMERATION_N:
        raise DataError(f"enumeration supports 5 <= n <= {MAX_ENUMERATION_N}, got {n}")
    # item 0 is always in block 0; enumerate the rest in base 3
    codes = np.arange(3 ** (n - 1), dtype=np.int64)
    raw = np.zeros((codes.size, n), dtype=np.int8)
    for pos in range(n - 1, 0, -1):
        raw[:, pos] = codes % 3
        codes //= 3
    has1 = (raw == 1).any(axis=1)
    has2 = (raw == 2).any(axis=1)
    first1 = np.argmax(raw == 1, axis=1)
    first2 = np.argmax(raw == 2, axis=1)
    keep = has1 & has2 & (first1 < first2)
    raw = raw[keep]
    sizes = np.stack([(raw == g).sum(axis=1) for g in range(3)], axis=1)
    ones = (sizes == 1).sum(axis=1)
    legal = ones == 0 if not allow_singleton else ones <= 1
    return _canonical_rows(raw[legal])


def enumerate_partitions(n: int) -> Iterator[Partition3]:
    """Yield every legal configuration of ``n`` items exactly once."""
    rows = partition_array(n).astype(np.int64) + 1
    for row in rows:
        yield Partition3._trusted(row)
