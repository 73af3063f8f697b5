"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class IdgpError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(IdgpError):
    """A file could not be parsed under its declared format."""


class DataInvariantError(IdgpError):
    """Data violates a structural invariant (bad candidate set, bad dims...)."""


class NumericError(IdgpError):
    """A numeric quantity left its valid domain (non-finite loss, underflow)."""
