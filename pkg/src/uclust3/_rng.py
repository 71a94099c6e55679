"""Seeding scheme.

Every random draw in the package comes from a PCG64 generator keyed by
``SeedSequence([seed, stream, *index])``. ``stream`` names the consumer
(data simulation, variance resampling, search restarts, ...) and
``index`` identifies the replicate, block, or restart. A stream depends
only on these integers, so results do not depend on the order in which
replicates are scheduled.
"""

import numpy as np

DATA = 1
VAR_NONSINGLETON = 2
VAR_SINGLETON = 3
SEARCH = 4
KMEANS = 5
STUDY = 6


def generator(seed: int, stream: int, *index: int) -> np.random.Generator:
    key = [int(seed), stream, *(int(i) for i in index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
