"""Exception taxonomy shared across the package.

All exceptions derive from SpectraStatError so callers can catch the
package's failures with one clause.  The CLI maps ConfigError-like
failures to exit code 2 and NumericalError to exit code 3.
"""


class SpectraStatError(Exception):
    """Base class for every error raised by spectrastat."""


class InputError(SpectraStatError, ValueError):
    """Malformed data: non-finite entries, shape mismatch, empty input."""


class PreconditionError(SpectraStatError, ValueError):
    """An operation's stated precondition does not hold (e.g. n too small)."""


class DomainError(SpectraStatError, ValueError):
    """Argument outside the mathematical domain (e.g. log of a zero eigenvalue)."""


class RankError(SpectraStatError, ValueError):
    """Rank deficiency or singularity where an invertible matrix is required."""


class NumericalError(SpectraStatError, RuntimeError):
    """A numerical procedure failed to converge or blew up."""


class ConfigError(SpectraStatError, ValueError):
    """Invalid experiment / CLI configuration."""
