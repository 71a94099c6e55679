"""Loading observation matrices and building pairwise kernel matrices."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from uclust3.exceptions import DataError

KERNELS = ("msd", "euclidean", "precomputed")
_ALIASES = {"mean-squared-difference": "msd", "msd": "msd", "euclidean": "euclidean"}
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """``n`` observations (rows) by ``L`` features (columns)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"data must be a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {i + 1}, column {j + 1}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric ``n x n`` matrix of pairwise kernel values."""

    values: np.ndarray
    kind: str = "precomputed"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"kernel matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("kernel matrix has non-finite entries")
        if not np.array_equal(values, values.T):
            raise DataError("kernel matrix is not symmetric")
        if self.kind not in KERNELS:
            raise DataError(f"unknown kernel kind {self.kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _read_rows(path, has_header: bool) -> list[list[float]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    rows: list[list[float]] = []
    width = None
    with path.open(newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(not cell.strip() for cell in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataError(f"ragged row {lineno}: expected {width} columns, found {len(record)}")
            row = []
            for col, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric cell at row {lineno}, column {col}: {cell!r}") from None
                row.append(value)
            rows.append(row)
    if not rows:
        raise DataError(f"no data rows in {path}")
    return rows


def load_matrix(path, has_header: bool = False) -> DataMatrix:
    """Read a comma-separated file with one observation per row."""
    return DataMatrix(np.array(_read_rows(path, has_header), dtype=float))


def kernel_matrix(data, kind: str = "msd") -> KernelMatrix:
    """Pairwise kernel matrix of the rows of ``data``.

    ``msd`` is the coordinate-averaged squared difference
    ``(1/L) * sum_l (x_il - x_jl)**2``; ``euclidean`` is the plain
    Euclidean distance.
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    key = _ALIASES.get(kind)
    if key is None:
        raise DataError(f"unknown kernel {kind!r}; choose 'msd' or 'euclidean'")
    x = data.values
    if key == "msd":
        # pdist evaluates each pair with a fixed loop, so the result is deterministic
        values = squareform(pdist(x, "sqeuclidean")) / data.L
    else:
        values = squareform(pdist(x, "euclidean"))
    return KernelMatrix(values, kind=key)


def load_kernel_matrix(path, has_header: bool = False) -> KernelMatrix:
    """Read a precomputed square distance matrix.

    Asymmetry larger than 1e-9 is reported as an error; smaller
    discrepancies are averaged away.
    """
    values = np.array(_read_rows(path, has_header), dtype=float)
    n, m = values.shape
    if n != m:
        raise DataError(f"non-square distance matrix: {n} rows, {m} columns")
    if not np.all(np.isfinite(values)):
        raise DataError("distance matrix has non-finite entries")
    diff = np.abs(values - values.T)
    if diff.max(initial=0.0) > SYMMETRY_TOL:
        i, j = np.argwhere(diff > SYMMETRY_TOL)[0]
        raise DataError(f"asymmetric at ({i + 1},{j + 1}): {values[i, j]!r} vs {values[j, i]!r}")
    values = (values + values.T) / 2
    return KernelMatrix(values, kind="precomputed")


def as_kernel(k) -> np.ndarray:
    """Kernel values as a float array with a zero diagonal.

    U-statistics never use the diagonal, so zeroing it lets block sums
    be taken over whole sub-matrices.
    """
    values = k.values if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DataError(f"kernel matrix must be square, got shape {values.shape}")
    out = np.array(values, dtype=float)
    np.fill_diagonal(out, 0.0)
    return out

