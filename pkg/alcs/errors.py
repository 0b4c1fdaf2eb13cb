"""Exception types raised by the alcs library."""


class AlcsError(Exception):
    """Base class for all alcs errors."""


class ConfigError(AlcsError, ValueError):
    """Invalid run configuration or settings value."""


class DataError(AlcsError, ValueError):
    """Malformed, missing or unusable input data."""


class SelectionError(AlcsError, ValueError):
    """Query budget or selection request that cannot be satisfied."""


class OracleError(AlcsError, ValueError):
    """Label query outside the unlabeled pool."""
