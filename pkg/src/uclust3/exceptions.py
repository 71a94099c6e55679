"""Exception and warning types raised by the package."""


class DataError(ValueError):
    """Malformed input data, kernel matrix, or partition."""


class DegenerateVarianceError(ValueError):
    """The null variance of Bn is zero, so Bn cannot be standardized."""


class DegenerateVarianceWarning(RuntimeWarning):
    """Emitted when resampling yields a zero reference variance."""
