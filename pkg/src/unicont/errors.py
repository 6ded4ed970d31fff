"""Exception hierarchy shared by all modules."""


class UnicontError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgument(UnicontError, ValueError):
    pass


class GeometryViolation(InvalidArgument):
    """A ball or point leaves the domain it must stay inside."""


class NumericFailure(UnicontError, ArithmeticError):
    """A numerical routine did not converge or lost its accuracy guarantee."""


class AccuracyLoss(NumericFailure):
    pass


class ResolutionError(NumericFailure):
    """The lattice is too coarse to resolve the requested construction."""


class TotalRankLoss(NumericFailure):
    pass


class Infeasible(UnicontError):
    pass
