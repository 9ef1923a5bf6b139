"""Exception types shared across the package.

Everything raised by the library on bad input or a failed numeric
precondition derives from ``GroupAlignError``, so callers (and the CLI)
can catch one base class. Most subclasses also derive from ``ValueError``
because they signal invalid argument values.
"""


class GroupAlignError(Exception):
    """Base class for all library errors."""


class EmptySetError(GroupAlignError, ValueError):
    """An operation that needs at least one point got an empty set."""


class DegenerateSetError(GroupAlignError, ValueError):
    """All points coincide, so there is no scale to normalize by."""


class ShapeMismatchError(GroupAlignError, ValueError):
    """Array lengths, dimensionalities, or shapes disagree."""


class TooFewSetsError(GroupAlignError, ValueError):
    """A groupwise operation needs at least two point sets."""


class LevelError(GroupAlignError, ValueError):
    """A noise or deformation level is outside its valid range."""


class SingularTpsError(GroupAlignError, ValueError):
    """The thin-plate-spline system is singular (degenerate controls)."""


class NonFiniteError(GroupAlignError, ValueError):
    """A value that must be finite (coordinate, gradient, loss) is not.

    When raised mid-optimization, ``trace`` carries the per-step loss
    rows accumulated before the failure.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ParseError(GroupAlignError, ValueError):
    """A point file or manifest could not be parsed.

    ``path`` and ``line`` (1-based, or None when not line-specific)
    locate the offending input.
    """

    def __init__(self, message: str, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where = f"{where}line {line}: "
        super().__init__(f"{where}{message}")
        self.path = path
        self.line = line


class EmptyFileError(ParseError):
    """A point file contains no data lines."""


class MixedDimensionalityError(ParseError):
    """A point file mixes 2- and 3-column rows."""
