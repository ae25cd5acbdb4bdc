"""Exception hierarchy.

Two families cover every failure mode: InputError for invalid data, files,
or configuration supplied by the caller, and NumericalError for methods
that fail on structurally valid input. The command-line interface maps
them to exit codes 1 and 2 respectively.
"""

from __future__ import annotations


class TlsregError(Exception):
    """Base class for all library-specific errors."""


class InputError(TlsregError, ValueError):
    """Invalid data, file content, or configuration."""


class NumericalError(TlsregError, RuntimeError):
    """A numerical method failed or the problem instance is degenerate."""


# -- input family ------------------------------------------------------------

class EmptyInput(InputError):
    """A measurement set with zero entries was passed to a solver."""


class DegenerateEdge(InputError):
    """A graph edge connects coincident source points (zero-length segment)."""


class EmptyGraph(InputError):
    """All edges of a measurement graph were dropped as degenerate."""


class TooFewCorrespondences(InputError):
    """Registration needs at least 3 correspondences."""


class ProblemTooLarge(InputError):
    """The requested semidefinite program exceeds the configured size cap."""


class MalformedHeader(InputError):
    """A point-cloud file header could not be parsed."""


class UnsupportedFormat(InputError):
    """A file (or report version) is in a format this reader does not handle."""


class ShortFile(InputError):
    """A file ended before the element count declared in its header."""


# -- numerical family --------------------------------------------------------

class CliqueTooSmall(NumericalError):
    """Outlier pruning left fewer than 2 mutually consistent points."""


class NumericalFailure(NumericalError):
    """A solver produced a non-finite iterate or otherwise broke down."""


class NoModelFound(NumericalError):
    """A sampling-based solver exhausted its iterations without a valid model."""
