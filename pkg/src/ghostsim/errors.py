"""Exception hierarchy shared by the simulator and the command-line runner."""


class GhostSimError(Exception):
    """Base class for all package errors."""


class GridMismatchError(GhostSimError, ValueError):
    """Two operands live on incompatible sampling grids."""


class GuardError(GhostSimError):
    """A sampling, size or statistics precondition was violated."""


class InsufficientStatisticsError(GuardError):
    """Too few frames to form a second-order estimate."""


class UndefinedWidthError(GhostSimError, ValueError):
    """The intensity pattern has no fluctuations, so it has no correlation width."""


class ConfigError(GhostSimError, ValueError):
    """A scenario description is malformed.

    ``line`` is the 1-based line of the offending entry when it is known.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if line is not None:
            where = f"line {line}: "
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(where + message)
