"""Exception types shared across the package."""


class HistosegError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(HistosegError, ValueError):
    """An argument violates an operation's preconditions."""


class BracketError(HistosegError):
    """A root bracket does not contain a sign change."""


class EmptyHistogramError(HistosegError):
    """No usable mass: all samples out of range, or all counts zero."""


class FormatError(HistosegError):
    """A file does not conform to its expected format."""


class ScaleUnderflowError(HistosegError):
    """A scale shift would make the model variance non-positive."""


class UnresolvableClustersError(HistosegError):
    """The inverse scale walk hit variance underflow before reaching the
    requested minima count."""


class SearchLimitError(HistosegError):
    """The scale walk exhausted its step budget."""


class CountUnreachableError(HistosegError):
    """Scale bisection could not isolate a scale with the requested minima
    count.  ``nearest_counts`` holds the two counts observed on either side
    of the final bisection interval."""

    def __init__(self, message, nearest_counts=None):
        super().__init__(message)
        self.nearest_counts = nearest_counts


class DegenerateMixtureError(HistosegError):
    """A mixture component never crosses its neighbour, so no reference
    threshold exists between them."""


class EmptyClusterError(HistosegError):
    """A reference-point cluster contains no histogram mass."""


class DegenerateReferencesError(HistosegError):
    """The void and solid reference intensities coincide; the porosity map
    is undefined."""
