"""Exception types raised across the planning toolkit."""


class PoaError(Exception):
    """Base class for every error raised by this package."""


class OutOfBounds(PoaError):
    pass


class GeometryMismatch(PoaError):
    pass


class InvalidEndpoint(PoaError):
    pass


class NoPath(PoaError):
    pass


class NoFeasiblePath(NoPath):
    """Replanning rounds were exhausted without a stable 3D path."""


class NoNeighbour(PoaError):
    pass


class EmptyCloud(PoaError):
    pass


class DegenerateSurface(PoaError):
    pass


class PlacementFailure(PoaError):
    pass


class SpecParseError(PoaError):
    """Scenario text could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
