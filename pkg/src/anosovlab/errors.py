"""Exception hierarchy shared by all modules."""


class AnosovLabError(Exception):
    """Base class for all library errors."""


class SingularMatrix(AnosovLabError):
    pass


class NotHyperbolic(AnosovLabError):
    pass


class ComplexSpectrum(NotHyperbolic):
    pass


class Invertible(AnosovLabError):
    """|det| = 1: an Anosov diffeomorphism, outside this library's class."""


class Reducible(AnosovLabError):
    """The characteristic polynomial has a rational root."""


class NotAnosov(AnosovLabError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GridTooCoarse(AnosovLabError):
    pass


class NewtonDivergence(AnosovLabError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DegenerateSpectrum(AnosovLabError):
    pass


class BudgetExceeded(AnosovLabError):
    pass


class ChainTooShort(AnosovLabError):
    pass


class ChainNotLiftRealizable(AnosovLabError):
    pass


class NotOnLeaf(AnosovLabError):
    pass


class NoConvergence(AnosovLabError):
    pass


class PeriodMismatch(AnosovLabError):
    pass


class EmptyMatching(AnosovLabError):
    pass


class ObstructionNonzero(AnosovLabError):
    pass


class OrbitNotDense(AnosovLabError):
    pass


class SpecialMap(AnosovLabError):
    """Raised when a u-path is requested on a map whose verdict is Special."""


class SearchExhausted(AnosovLabError):
    def __init__(self, message, best_gap=None):
        super().__init__(message)
        self.best_gap = best_gap


class NotConjugatePair(AnosovLabError):
    pass


class HomotopyMismatch(AnosovLabError):
    pass


class CertificationFailure(AnosovLabError):
    pass


class TopologicalPrerequisiteFailed(AnosovLabError):
    pass


class SpecFileError(AnosovLabError):
    """Malformed map-spec or config file."""
