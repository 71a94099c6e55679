"""Three-group homogeneity testing and significance clustering for
high-dimension, low-sample-size data based on U-statistics."""

from uclust3.combinat import (
    PartitionCount,
    enumerate_partitions,
    singleton_count,
    nonunit_count,
    total_count,
    two_group_count,
)
from uclust3.data import (
    DataMatrix,
    KernelMatrix,
    kernel_matrix,
    load_kernel_matrix,
    load_matrix,
)
from uclust3.exceptions import DataError, DegenerateVarianceError, DegenerateVarianceWarning
from uclust3.inference import TestOutcome, max_test_pvalue, utest3
from uclust3.search import ClusterResult, SearchConfig, maximize_std_bn, uclust3
from uclust3.ustat import Partition3, bn, combined_u, u_between, u_within
from uclust3.variance import VarianceModel, c_n, estimate_reference, var_for, zeta1, zeta2

__version__ = "0.1.0"

__all__ = [
    "ClusterResult",
    "DataError",
    "DataMatrix",
    "DegenerateVarianceError",
    "DegenerateVarianceWarning",
    "KernelMatrix",
    "Partition3",
    "PartitionCount",
    "SearchConfig",
    "TestOutcome",
    "VarianceModel",
    "bn",
    "c_n",
    "combined_u",
    "enumerate_partitions",
    "estimate_reference",
    "kernel_matrix",
    "load_kernel_matrix",
    "load_matrix",
    "max_test_pvalue",
    "maximize_std_bn",
    "nonunit_count",
    "singleton_count",
    "total_count",
    "two_group_count",
    "u_between",
    "u_within",
    "uclust3",
    "utest3",
    "var_for",
    "zeta1",
    "zeta2",
]
