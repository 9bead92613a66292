"""Exception hierarchy shared by every stage of the pipeline."""


class GGEVError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GGEVError, ValueError):
    """Tensor shapes are incompatible with the requested operation."""


class ConfigurationError(GGEVError, ValueError):
    """A hyperparameter or weight bundle violates a structural constraint."""


class FormatError(GGEVError, ValueError):
    """A file on disk is malformed, truncated or carries non-finite data."""


class UndefinedMetricError(GGEVError, ValueError):
    """A metric was requested over an empty set of valid pixels."""


class SceneError(GGEVError, ValueError):
    """A synthetic scene description cannot be realised."""
