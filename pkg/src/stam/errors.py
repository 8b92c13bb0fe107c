"""Exception types shared across the package.

Every error raised on a documented failure path derives from StamError so
callers can catch the package's failures with a single except clause.
"""


class StamError(Exception):
    """Base class for all errors raised by this package."""


# grid
class OutOfBounds(StamError):
    """A world point or cell index falls outside the grid."""


class MapFormatError(StamError):
    """A map file does not follow the expected text format."""


# mixtures
class EmptyData(StamError):
    """An operation received zero data points."""


class TooFewSamples(StamError):
    """Fewer samples than clusters/components requested."""


class DimensionMismatch(StamError):
    """Data dimensionality does not match the model's."""


class NumericalFailure(StamError):
    """An iterative numeric routine lost stability (non-finite values)."""


# regression
class BadIndex(StamError):
    """A dimension index is out of range or repeated."""


class SingularInputBlock(StamError):
    """A conditioning input block is numerically singular."""


# affordance registry
class DuplicateTask(StamError):
    """A task id is already registered."""


class UnknownTask(StamError):
    """A task id is not registered."""


class InvalidParams(StamError):
    """A signature update carried parameters that fail validation."""


class GeometryMismatch(StamError):
    """Two grids/fields do not share geometry (size, resolution, origin)."""


class EmptyInput(StamError):
    """A combinator received an empty sequence of inputs."""


class EmptyTaskSet(StamError):
    """An evaluation was requested for zero tasks."""


# planner
class RangeViolation(StamError):
    """A numeric argument is outside its documented range."""


class NoAffordantRegion(StamError):
    """No cell clears the affordance threshold; there is no goal."""


class Unreachable(StamError):
    """No traversable path exists between start and goal."""


# sim
class BadBand(StamError):
    """A distance band is malformed (d_min <= 0 or d_min >= d_max)."""


# dataset / experiments
class DuplicateDemo(StamError):
    """A demonstration id is already present in the store."""


class UnknownDemo(StamError):
    """A demonstration id is not present in the store."""


class EmptyStore(StamError):
    """The demonstration store holds no records."""


class EmptyEval(StamError):
    """An evaluation set holds no records."""


class NoModel(StamError):
    """An operation requires a fitted model and none exists yet."""
