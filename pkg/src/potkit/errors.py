"""Exception types shared across the toolkit."""


class PotkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(PotkitError):
    """A point's dimension does not match the domain's."""


class GridSizeError(PotkitError):
    """Grid construction would exceed the node cap or is degenerate."""


class UnsupportedKernelError(PotkitError):
    """No closed form for this (operator, domain) pair; use the discrete path."""


class AssemblyError(PotkitError):
    """Discrete operator assembly failed (e.g. coefficient bounds violated)."""


class ConvergenceError(PotkitError):
    """An iterative solver did not converge within its iteration cap."""


class SupportError(PotkitError):
    """A point lies outside the support region required by the operation."""


class ConfigError(PotkitError):
    """Experiment configuration is invalid; message names the offending field."""
