"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NonpositiveMarginalError
and other numerical failures -> 3, ResourceLimitError -> 4.
"""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


class ResourceLimitError(RuntimeError):
    """A configured resource cap (truncation level, simulation budget,
    enumeration size) would be exceeded."""


class CalibrationError(RuntimeError):
    """Replication calibration cannot proceed (e.g. every pilot estimate
    was exactly zero)."""


class NonpositiveMarginalError(RuntimeError):
    """The self-normalizing weight sum came out non-positive, so normalized
    estimates are undefined.  Raw sums are attached for diagnosis."""

    def __init__(self, message, weight_sum=None, n_negative=None, n_samples=None):
        super().__init__(message)
        self.weight_sum = weight_sum
        self.n_negative = n_negative
        self.n_samples = n_samples
