"""Exception types raised across the package."""


class LabError(Exception):
    """Base class for all package errors."""


class GridError(LabError, ValueError):
    """Invalid momentum grid, polarization request or spectral symbol."""


class TruncationError(LabError, ValueError):
    """A truncation budget (base level plus guard) is too small for the request."""


class AliasingError(LabError, ValueError):
    """A lattice function or state is not band-limited enough for an exact identity."""


class InfraredError(LabError, ValueError):
    """A cutoff profile is not square integrable against omega**-3."""


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration."""
