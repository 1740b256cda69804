"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An experiment configuration failed parsing or validation."""


class SolverError(RuntimeError):
    """An inner solve or a time-stepping run failed."""


class NonContractionError(SolverError):
    """The fixed-point map stopped contracting on a time window."""
