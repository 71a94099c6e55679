"""Within/between-group U-statistics and the three-group Bn statistic.

Everything is computed from group block sums of the kernel matrix:
``S[g, h] = sum_{i in g, j in h, i != j} K[i, j]`` (ordered pairs), so
``S[g, g]`` counts each within-group pair twice. One pass over the
matrix gives Bn for any partition, and moving one observation updates
the sums in O(n).
"""

from dataclasses import dataclass

import numpy as np

from uclust3.data import as_kernel
from uclust3.exceptions import DataError


@dataclass(frozen=True, eq=False)
class Partition3:
    """Assignment of ``n`` observations to groups labelled 1, 2, 3.

    At most one group may be a singleton; the others need two or more
    members.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64).ravel()
        if labels.size < 5:
            raise DataError(f"a three-group partition needs n >= 5, got {labels.size}")
        if not np.isin(labels, (1, 2, 3)).all():
            raise DataError("group labels must be 1, 2 or 3")
        sizes = np.bincount(labels, minlength=4)[1:]
        if (sizes == 0).any():
            raise DataError(f"empty group in partition with sizes {tuple(sizes.tolist())}")
        if (sizes == 1).sum() > 1:
            raise DataError(f"at most one singleton group allowed, sizes {tuple(sizes.tolist())}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def _trusted(cls, labels: np.ndarray) -> "Partition3":
        """Wrap labels already known to be legal, skipping validation."""
        labels.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "labels", labels)
        return obj

    @classmethod
    def from_groups(cls, groups, n: int | None = None) -> "Partition3":
        """Build from three collections of 0-based indices."""
        if len(groups) != 3:
            raise DataError("exactly three groups are required")
        total = sum(len(g) for g in groups)
        n = total if n is None else n
        labels = np.zeros(n, dtype=np.int64)
        for g, members in enumerate(groups, start=1):
            idx = np.asarray(list(members), dtype=np.int64)
            if (labels[idx] != 0).any():
                raise DataError("groups overlap")
            labels[idx] = g
        if (labels == 0).any():
            raise DataError("groups do not cover every observation")
        return cls(labels)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> tuple[int, int, int]:
        s = np.bincount(self.labels, minlength=4)[1:]
        return tuple(int(v) for v in s)

    @property
    def has_singleton(self) -> bool:
        return 1 in self.sizes

    def groups(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.flatnonzero(self.labels == g) for g in (1, 2, 3))

    def canonical(self) -> "Partition3":
        """Relabel groups in order of (size, smallest member).

        A singleton, if present, always becomes group 1.
        """
        groups = self.groups()
        order = sorted(range(3), key=lambda g: (groups[g].size, groups[g][0]))
        labels = np.empty(self.n, dtype=np.int64)
        for new, old in enumerate(order, start=1):
            labels[groups[old]] = new
        return Partition3(labels)

    def key(self) -> tuple[int, ...]:
        """Hashable label-invariant identity."""
        return tuple(self.canonical().labels.tolist())

    def __eq__(self, other):
        if not isinstance(other, Partition3):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Partition3(sizes={self.sizes}, labels={self.labels.tolist()})"


@dataclass(frozen=True)
class BnValue:
    bn: float
    singleton_case: bool


def _index_set(group, n: int) -> np.ndarray:
    idx = np.asarray(list(group), dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DataError(f"group index out of range for n={n}")
    if np.unique(idx).size != idx.size:
        raise DataError("group indices must be distinct")
    return idx


def u_within(k, group) -> float:
    """Mean kernel value over unordered pairs inside ``group``."""
    values = as_kernel(k)
    idx = _index_set(group, values.shape[0])
    m = idx.size
    if m < 2:
        raise DataError(f"within-group U-statistic needs at least 2 members, got {m}")
    return float(values[np.ix_(idx, idx)].sum() / (m * (m - 1)))


def u_between(k, group_a, group_b) -> float:
    """Mean kernel value over all cross pairs of two disjoint groups."""
    values = as_kernel(k)
    a = _index_set(group_a, values.shape[0])
    b = _index_set(group_b, values.shape[0])
    if a.size == 0 or b.size == 0:
        raise DataError("between-group U-statistic needs non-empty groups")
    if np.intersect1d(a, b).size:
        raise DataError("groups overlap")
    return float(values[np.ix_(a, b)].mean())


def combined_u(k) -> float:
    """Mean kernel value over all unordered pairs of the pooled sample."""
    values = as_kernel(k)
    n = values.shape[0]
    if n < 2:
        raise DataError("combined U-statistic needs n >= 2")
    return float(values.sum() / (n * (n - 1)))


def block_sums(values: np.ndarray, labels0: np.ndarray) -> np.ndarray:
    """Block sums for one (``(n,)``) or many (``(B, n)``) 0-based labellings.

    ``values`` must already have a zero diagonal.
    """
    onehot = (np.asarray(labels0)[..., None] == np.arange(3)).astype(float)
    kz = values @ onehot
    return np.swapaxes(onehot, -1, -2) @ kz


def bn_from_blocks(sums: np.ndarray, sizes: np.ndarray, n: int) -> np.ndarray:
    """Bn from block sums, vectorised over leading axes.

    ``sums`` has shape ``(..., 3, 3)`` and ``sizes`` ``(..., 3)``. When a
    group is a singleton its missing within-group mean is replaced, in
    each pair term, by the within-group mean of the partner group; this
    reproduces the size-one extension term by term.
    """
    sizes = np.asarray(sizes, dtype=float)
    diag = np.diagonal(sums, axis1=-2, axis2=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        within = np.where(sizes >= 2, diag / (sizes * (sizes - 1)), np.nan)
    scale = n * (n - 1)
    total = 0.0
    for g, h in ((0, 1), (0, 2), (1, 2)):
        ng, nh = sizes[..., g], sizes[..., h]
        wg = np.where(ng >= 2, within[..., g], within[..., h])
        wh = np.where(nh >= 2, within[..., h], within[..., g])
        total = total + (2 * sums[..., g, h] - ng * nh * (wg + wh)) / scale
    return total


def sizes_of(labels0: np.ndarray) -> np.ndarray:
    labels0 = np.asarray(labels0)
    return np.stack([(labels0 == g).sum(axis=-1) for g in range(3)], axis=-1)


def bn(k, p: Partition3) -> BnValue:
    """Bn of the partition ``p``, using the singleton extension when needed."""
    values = as_kernel(k)
    if not isinstance(p, Partition3):
        p = Partition3(p)
    if p.n != values.shape[0]:
        raise DataError(f"partition has {p.n} labels but the kernel matrix has {values.shape[0]} rows")
    labels0 = p.labels - 1
    value = bn_from_blocks(block_sums(values, labels0), np.array(p.sizes), p.n)
    return BnValue(bn=float(value), singleton_case=p.has_singleton)


def within_component(k, p: Partition3) -> float:
    """Size-weighted sum of within-group means, the complement of Bn."""
    n = p.n
    return sum(len(g) / n * u_within(k, g) for g in p.groups())


class BlockState:
    """Block sums of a labelling, kept current under single-element moves.

    ``rows[i, g]`` is the sum of ``K[i, j]`` over members ``j`` of group
    ``g``; moving one element touches one column pair of ``rows``.
    """

    def __init__(self, values: np.ndarray, labels0):
        self.values = values
        self.n = values.shape[0]
        self.labels = np.array(labels0, dtype=np.intp)
        onehot = (self.labels[:, None] == np.arange(3)).astype(float)
        self.rows = values @ onehot
        self.sums = onehot.T @ self.rows
        self.sizes = np.bincount(self.labels, minlength=3).astype(np.intp)

    def bn(self) -> float:
        return float(bn_from_blocks(self.sums, self.sizes, self.n))

    def move(self, i: int, b: int) -> None:
        a = self.labels[i]
        if a == b:
            return
        r = self.rows[i]
        d = np.zeros(3)
        d[b] += 1.0
        d[a] -= 1.0
        self.sums += np.outer(d, r) + np.outer(r, d)
        col = self.values[:, i]
        self.rows[:, a] -= col
        self.rows[:, b] += col
        self.labels[i] = b
        self.sizes[a] -= 1
        self.sizes[b] += 1

    def swap(self, i: int, j: int) -> None:
        a, b = self.labels[i], self.labels[j]
        self.move(i, b)
        self.move(j, a)

    def recompute(self) -> None:
        self.__init__(self.values, self.labels)
