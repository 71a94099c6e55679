"""Fixed-partition homogeneity test and p-values for the maximum standardized Bn."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr

from uclust3.combinat import total_count
from uclust3.exceptions import DataError, DegenerateVarianceError
from uclust3.ustat import Partition3, bn
from uclust3.variance import VarianceModel, var_for

# multiplicities at or above 2**28 use the Gumbel limit
GUMBEL_LOG2_THRESHOLD = 28
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class TestOutcome:
    bn: float
    variance: float
    std_bn: float
    p_value: float
    alpha: float
    reject: bool
    n_star: int
    sizes: tuple[int, int, int] | None = None

    __test__ = False  # not a pytest class


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def gumbel_constants(log_n_star: float) -> tuple[float, float]:
    """Classical location and scale for the maximum of N standard normals."""
    s = math.sqrt(2.0 * log_n_star)
    loc = s - (math.log(log_n_star) + math.log(4 * math.pi)) / (2 * s)
    return loc, 1.0 / s


def pvalues(std_bn, log_n_star: float) -> np.ndarray:
    """Vectorised max-test p-values for multiplicity ``exp(log_n_star)``."""
    x = np.asarray(std_bn, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if log_n_star / math.log(2) >= GUMBEL_LOG2_THRESHOLD:
            loc, scale = gumbel_constants(log_n_star)
            z = -(x - loc) / scale
            p = -np.expm1(-np.exp(np.minimum(z, 700.0)))
        else:
            log_phi = log_ndtr(x)
            # n_star * log Phi(x) is formed in log space so huge counts stay finite
            log_mag = log_n_star + np.log(-log_phi)
            p = np.where(log_phi == 0.0, 0.0, -np.expm1(-np.exp(np.minimum(log_mag, 700.0))))
    if np.isnan(p).any():
        raise FloatingPointError("p-value evaluated to NaN")
    p = np.clip(p, 0.0, 1.0)
    return np.where(p < _TINY, 0.0, p)


def _log_multiplicity(n, n_star, log_n_star) -> float:
    if log_n_star is not None:
        return float(log_n_star)
    if n_star is not None:
        if n_star < 1:
            raise DataError("n_star must be >= 1")
        return math.log(n_star)
    if n is None:
        raise DataError("give either n or n_star")
    return total_count(n).log_gamma3


def max_test_pvalue(std_bn: float, n: int | None = None, n_star: int | None = None,
                    log_n_star: float | None = None) -> float:
    """Upper-tail p-value of ``std_bn`` as the largest of ``n_star`` independent normals.

    ``n_star`` defaults to the number of legal three-group configurations
    of ``n`` items. The exact ``1 - Phi(x)**n_star`` is evaluated in log
    space; from ``n_star >= 2**28`` on, the Gumbel limit is used instead.
    """
    return float(pvalues(float(std_bn), _log_multiplicity(n, n_star, log_n_star)))


def critical_value(alpha: float, n: int | None = None, n_star: int | None = None) -> float:
    """Smallest standardized Bn whose max-test p-value falls below ``alpha``."""
    alpha = check_alpha(alpha)
    log_n = _log_multiplicity(n, n_star, None)
    f = lambda x: max_test_pvalue(x, log_n_star=log_n) - alpha  # noqa: E731
    return brentq(f, -40.0, 40.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def utest3(k, p: Partition3, model: VarianceModel, alpha: float = 0.05) -> TestOutcome:
    """Test homogeneity of three pre-specified groups.

    The groups are fixed in advance, so the one-sided p-value carries no
    multiplicity correction.
    """
    alpha = check_alpha(alpha)
    if not isinstance(p, Partition3):
        p = Partition3(p)
    if p.n != model.n:
        raise DataError(f"partition has {p.n} labels but the variance model was built for n={model.n}")
    value = bn(k, p).bn
    variance = var_for(model, p.sizes)
    if not variance > 0.0:
        raise DegenerateVarianceError("degenerate variance: Bn has zero null variance")
    std = value / math.sqrt(variance)
    pval = max_test_pvalue(std, n_star=1)
    return TestOutcome(
        bn=value,
        variance=variance,
        std_bn=std,
        p_value=pval,
        alpha=alpha,
        reject=pval < alpha,
        n_star=1,
        sizes=p.sizes,
    )
