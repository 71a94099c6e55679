"""Null variance of Bn: one resampling run per regime, reweighted to all shapes.

Sizes with every group >= 2 share a variance that scales with the sum of
squared Hoeffding weights ``c_n``; sizes with a singleton differ from a
reference singleton shape by ``zeta2`` shifts times the second-order
variance ``tau2``. So two resampling runs cover every legal shape.

Two resampling schemes are available:

``labels``
    Uniformly random assignment of the observed indices to groups of the
    reference sizes. Needs only the kernel matrix. When the data do
    contain groups, the group structure leaks into the estimate and
    inflates it.
``coordinates``
    Each coordinate of the raw data is permuted independently across
    observations, the kernel is rebuilt, and Bn is evaluated at a fixed
    labelling. This destroys any row-level group structure while keeping
    each coordinate's pooled distribution; it assumes independent
    coordinates and needs the raw data.
"""

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from uclust3 import _rng
from uclust3.data import as_kernel, kernel_matrix
from uclust3.exceptions import DataError, DegenerateVarianceWarning
from uclust3.ustat import block_sums, bn_from_blocks

SCHEMES = ("labels", "coordinates")
DEFAULT_REPS = 2000
MIN_REPS = 100
BLOCK = 256
# resampled sd below this fraction of the kernel scale is treated as exactly zero
DEGENERATE_RTOL = 1e-12


def _check_nonsingleton(n: int, n1: int, n2: int) -> int:
    n3 = n - n1 - n2
    if min(n1, n2, n3) < 2:
        raise DataError(f"all group sizes must be >= 2, got ({n1}, {n2}, {n3})")
    return n3


def c_n_exact(n: int, n1: int, n2: int) -> Fraction:
    """Sum of squared Hoeffding weights as an exact rational."""
    n3 = _check_nonsingleton(n, n1, n2)
    inner = sum(Fraction(n - g, 2 * (g - 1)) for g in (n1, n2, n3))
    return n * (n - 1) * (1 + inner / n)


def c_n(n: int, n1: int, n2: int) -> float:
    """Sum over pairs of squared weights ``eta_ij`` for sizes ``(n1, n2, n - n1 - n2)``.

    >>> c_n(6, 2, 2)
    60.0
    """
    return float(c_n_exact(n, n1, n2))


def zeta1(n: int) -> float:
    if n < 5:
        raise DataError(f"n must be >= 5, got {n}")
    return 4 / (n * (n - 1))


def zeta2(n: int, n2: int) -> float:
    """Second-order variance coefficient for sizes ``(1, n2, n - 1 - n2)``."""
    if n < 5:
        raise DataError(f"n must be >= 5, got {n}")
    n3 = n - n2 - 1
    if n2 < 2 or n3 < 2:
        raise DataError(f"n2 must lie in [2, {n - 3}] for n={n}, got {n2}")
    a = n * n * (n - 1) ** 2
    return (
        4 / (n * n * (n - 1))
        + 4 * n2 * n3 / a
        + 2 * n2 * (2 + n3) ** 2 / ((n2 - 1) * a)
        + 2 * n3 * (2 + n2) ** 2 / ((n3 - 1) * a)
    )


@dataclass(frozen=True)
class VarianceModel:
    """Reference variances from resampling plus what is needed to reweight them."""

    n: int
    v_ref: float
    ref_sizes: tuple[int, int, int]
    tau2_hat: float
    v_singleton_ref: float
    singleton_ref_n2: int
    reps: int
    seed: int
    scheme: str = "labels"

    @property
    def degenerate(self) -> bool:
        return self.v_ref == 0.0

    def var(self, sizes) -> float:
        return var_for(self, sizes)


def reference_sizes(n: int) -> tuple[int, int, int]:
    m = n // 3
    return (m, m, n - 2 * m)


def singleton_reference_sizes(n: int) -> tuple[int, int, int]:
    n2 = (n - 1) // 2
    return (1, n2, n - 1 - n2)


def resample_bn(values: np.ndarray, sizes, reps: int, seed: int, stream: int) -> np.ndarray:
    """Bn over ``reps`` uniformly random assignments into groups of fixed ``sizes``.

    Draws come in blocks of 256; block ``b`` uses its own stream keyed by
    ``(seed, stream, b)``.
    """
    n = values.shape[0]
    template = np.repeat(np.arange(3), sizes)
    out = np.empty(reps)
    sizes_arr = np.asarray(sizes)
    for b, start in enumerate(range(0, reps, BLOCK)):
        m = min(BLOCK, reps - start)
        rng = _rng.generator(seed, stream, b)
        labels = rng.permuted(np.tile(template, (m, 1)), axis=1)
        out[start:start + m] = bn_from_blocks(block_sums(values, labels), sizes_arr, n)
    return out


def msd_quadratic_form(sizes) -> np.ndarray:
    """Matrix ``M`` with ``Bn = sum_l x_l' M x_l / L`` under the msd kernel.

    Bn is linear in the block sums, so each ordered pair ``(i, j)`` gets the
    coefficient of ``S[g_i, g_j]``; expanding ``(x_i - x_j)**2`` turns the
    weighted pair sum into a Laplacian-type quadratic form.
    """
    sizes_arr = np.asarray(sizes)
    n = int(sizes_arr.sum())
    coef = np.empty((3, 3))
    for g in range(3):
        for h in range(3):
            unit = np.zeros((3, 3))
            unit[g, h] = 1.0
            coef[g, h] = bn_from_blocks(unit, sizes_arr, n)
    labels = np.repeat(np.arange(3), sizes_arr)
    v = coef[labels[:, None], labels[None, :]]
    v = (v + v.T) / 2
    np.fill_diagonal(v, 0.0)
    return 2 * (np.diag(v.sum(axis=1)) - v)


def resample_bn_coordinates(data, kind: str, sizes, reps: int, seed: int, stream: int) -> np.ndarray:
    """Bn at a fixed labelling over ``reps`` column-wise permutations of ``data``.

    Labels are the first ``sizes[0]`` rows, then the next ``sizes[1]``, and
    so on; after permuting every column the row order carries no information.
    """
    x = np.asarray(data.values if hasattr(data, "values") else data, dtype=float)
    n, length = x.shape
    labels = np.repeat(np.arange(3), sizes)
    sizes_arr = np.asarray(sizes)
    form = msd_quadratic_form(sizes) if kind == "msd" else None
    out = np.empty(reps)
    for b, start in enumerate(range(0, reps, BLOCK)):
        rng = _rng.generator(seed, stream, b)
        for r in range(start, min(start + BLOCK, reps)):
            y = rng.permuted(x, axis=0)
            if form is not None:
                out[r] = np.einsum("il,il->", y, form @ y) / length
            else:
                values = kernel_matrix(y, kind).values
                out[r] = bn_from_blocks(block_sums(values, labels), sizes_arr, n)
    return out


def _sample_var(draws: np.ndarray, scale: float) -> float:
    v = float(np.var(draws, ddof=1))
    if scale == 0.0 or np.sqrt(v) <= DEGENERATE_RTOL * scale:
        return 0.0
    return v


def estimate_reference(k, reps: int = DEFAULT_REPS, seed: int = 0, scheme: str = "labels",
                       data=None) -> VarianceModel:
    """Resample Bn at the balanced shape and at a balanced singleton shape.

    ``data`` (the raw observations behind ``k``) is required by the
    ``coordinates`` scheme.
    """
    values = as_kernel(k)
    n = values.shape[0]
    if reps < MIN_REPS:
        raise DataError(f"reps must be >= {MIN_REPS}, got {reps}")
    if n < 6:
        raise DataError(f"variance reference needs n >= 6, got {n}")
    if seed < 0:
        raise DataError("seed must be non-negative")
    if scheme not in SCHEMES:
        raise DataError(f"unknown resampling scheme {scheme!r}; choose from {SCHEMES}")
    scale = float(np.abs(values).max())
    ref = reference_sizes(n)
    sref = singleton_reference_sizes(n)
    if scheme == "labels":
        draws = resample_bn(values, ref, reps, seed, _rng.VAR_NONSINGLETON)
        single = resample_bn(values, sref, reps, seed, _rng.VAR_SINGLETON)
    else:
        kind = getattr(k, "kind", None)
        if data is None or kind not in ("msd", "euclidean"):
            raise DataError("the coordinates scheme needs the raw data and an msd or euclidean kernel")
        x = data.values if hasattr(data, "values") else np.asarray(data, dtype=float)
        if x.shape[0] != n:
            raise DataError(f"data has {x.shape[0]} rows but the kernel matrix has {n}")
        draws = resample_bn_coordinates(x, kind, ref, reps, seed, _rng.VAR_NONSINGLETON)
        single = resample_bn_coordinates(x, kind, sref, reps, seed, _rng.VAR_SINGLETON)
    v_ref = _sample_var(draws, scale)
    v_single = _sample_var(single, scale)
    if v_ref == 0.0:
        warnings.warn("resampled variance of Bn is zero (constant kernel?)", DegenerateVarianceWarning, stacklevel=2)
        v_single = 0.0
    tau2 = v_ref / (c_n(n, ref[0], ref[1]) * (2 / (n * (n - 1))) ** 2)
    return VarianceModel(
        n=n,
        v_ref=v_ref,
        ref_sizes=ref,
        tau2_hat=tau2,
        v_singleton_ref=v_single,
        singleton_ref_n2=sref[1],
        reps=reps,
        seed=seed,
        scheme=scheme,
    )


def check_sizes(sizes, n: int) -> tuple[int, int, int]:
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or sum(sizes) != n:
        raise DataError(f"sizes {sizes} do not describe three groups of n={n}")
    if min(sizes) < 1 or sizes.count(1) > 1:
        raise DataError(f"illegal sizes {sizes}: at most one singleton, others >= 2")
    return sizes


def var_for(model: VarianceModel, sizes) -> float:
    """Null variance of Bn for the given group sizes (any order)."""
    n = model.n
    sizes = check_sizes(sizes, n)
    if 1 in sizes:
        rest = sorted(sizes)[1:]
        n2 = rest[0]
        shift = zeta2(n, n2) - zeta2(n, model.singleton_ref_n2) if n2 != model.singleton_ref_n2 else 0.0
        return model.v_singleton_ref + shift * model.tau2_hat
    ratio = c_n_exact(n, sizes[0], sizes[1]) / c_n_exact(n, model.ref_sizes[0], model.ref_sizes[1])
    return model.v_ref * float(ratio) if ratio != 1 else model.v_ref


def variance_table(model: VarianceModel) -> np.ndarray:
    """``table[a, b]`` is the variance for sizes ``(a, b, n - a - b)``; NaN if illegal."""
    n = model.n
    table = np.full((n + 1, n + 1), np.nan)
    for a in range(1, n):
        for b in range(1, n - a):
            c = n - a - b
            if c >= 1 and (a, b, c).count(1) <= 1:
                table[a, b] = var_for(model, (a, b, c))
    return table
