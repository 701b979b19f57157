"""Exception types shared across the package."""


class SoftnavError(Exception):
    """Base class for all package errors."""


class DomainError(SoftnavError, ValueError):
    """A parameter is outside its mathematically valid range."""


class DegeneratePointError(SoftnavError, ValueError):
    """A geometric operation was evaluated at a point where it is undefined."""


class SingularBasisError(SoftnavError):
    """The modulation basis matrix is numerically singular."""


class InteriorPointError(SoftnavError):
    """A query point lies inside an obstacle's (safety-scaled) hard core."""

    def __init__(self, message, obstacle_index=None):
        super().__init__(message)
        self.obstacle_index = obstacle_index


class ScenarioError(SoftnavError, ValueError):
    """A scenario or parameter file failed to parse or validate.

    ``field_path`` points at the offending entry, e.g. ``obstacles[0].soft_ratio``.
    """

    def __init__(self, field_path, message):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
