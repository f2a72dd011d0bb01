"""Exception hierarchy shared by all subtrack modules."""


class SubtrackError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SubtrackError, ValueError):
    pass


class EigenSolverError(SubtrackError, RuntimeError):
    """The dense eigensolver failed to converge."""


class ParseError(SubtrackError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SubtrackError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OutOfRangeError(SubtrackError, IndexError):
    pass


class InvalidRankError(SubtrackError, ValueError):
    pass


class DegenerateRankError(SubtrackError):
    """Thresholding a window left no eigenvalue above ``b``.

    Detection cannot continue for the affected segment because the eigenvalue
    statistic has no rank to index.
    """

    def __init__(self, message, start=None, window=None):
        self.start = start
        self.window = window
        super().__init__(message)


class InfeasibleProbabilityError(SubtrackError, ValueError):
    pass


class EmptyCommunityError(SubtrackError, ValueError):
    pass


class ClusteringError(SubtrackError, RuntimeError):
    pass
