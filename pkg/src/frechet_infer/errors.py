"""Exception hierarchy."""


class FrechetError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(FrechetError):
    """Shapes of inputs do not agree with each other or with the space."""


class InvalidPointError(FrechetError):
    """A point violates the membership constraints of its space."""


class DegenerateGeometryError(FrechetError):
    """A solve hit an ill-posed configuration, e.g. an antipodal pair on the sphere."""


class SolverError(FrechetError):
    """A numerical solve produced an unusable result."""


class ConvergenceWarning(UserWarning):
    """An iterative solve stopped at ``max_iter`` before meeting its tolerance."""
