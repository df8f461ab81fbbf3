"""Exception types shared across the package."""


class ResolutionError(ValueError):
    """A physical-space grid is too coarse for the requested operation."""


class GridMismatchError(ValueError):
    """Two fields that must share a wavenumber grid do not."""


class CadenceError(ValueError):
    """Stored samples are too sparse for a finite-difference evaluation."""


class OracleError(RuntimeError):
    """The exact-solution oracle refuses to produce an untrustworthy answer."""


class ConfigError(ValueError):
    """An invalid or inconsistent run configuration."""
