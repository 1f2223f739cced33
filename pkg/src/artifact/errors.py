"""Exception hierarchy shared across the library."""


class ArtifactError(Exception):
    """Base class for all library errors."""


class InputLengthError(ArtifactError):
    """An input sequence has the wrong number of elements."""


class DomainError(ArtifactError):
    """A numeric argument lies outside its admissible domain."""


class ParameterError(ArtifactError):
    """A configuration parameter or dimension is invalid."""


class DegenerateEstimateError(ArtifactError):
    """The Wiener normal equations are numerically singular."""


class UndefinedMetricError(ArtifactError):
    """A quality metric is undefined for the given reference."""


class ConfigError(ArtifactError):
    """An experiment configuration file or flag set is invalid."""
