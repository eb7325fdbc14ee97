"""Exception hierarchy shared across flexkit."""


class FlexError(Exception):
    """Base class for all flexkit errors."""


class InputError(FlexError):
    """Malformed model, set, or file contents."""


class DimensionMismatch(InputError):
    pass


class UnknownLabel(InputError):
    pass


class EqualityExclusion(InputError):
    pass


class NonCompactComposite(InputError):
    pass


class SolverError(FlexError):
    """An optimization engine could not certify a result."""


class SingularElimination(SolverError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    def __init__(self, message, ray=None):
        super().__init__(message)
        self.ray = ray


class NumericalBreakdown(SolverError):
    pass


class NoInteriorPoint(SolverError):
    pass


class NodeLimit(SolverError):
    def __init__(self, message, incumbent=None, gap=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.gap = gap


class InfeasibleNominal(SolverError):
    pass


class ImpracticalTruncation(SolverError):
    pass
