"""Exception hierarchy shared by the solver, checker and CLI layers."""


class AbsdeError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveDelay(AbsdeError):
    pass


class NoProgress(AbsdeError):
    pass


class IterationCap(AbsdeError):
    pass


class CollapsedKnots(AbsdeError):
    pass


class IndexOutOfRange(AbsdeError, IndexError):
    pass


class NonFiniteValue(AbsdeError):
    """A drift evaluation returned inf or nan.

    ``step`` and ``iteration`` locate the failure; ``node`` is the first
    offending up-count (lattice) or path index (Monte Carlo).
    """

    def __init__(self, message, step=None, node=None, iteration=None):
        super().__init__(message)
        self.step = step
        self.node = node
        self.iteration = iteration


class UnsolvedRegion(AbsdeError):
    pass


class PreconditionFailed(AbsdeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class AnticipatedZDependence(AbsdeError):
    pass


class AnticipatedDependence(AbsdeError):
    pass


class IllConditioned(AbsdeError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnknownFixture(AbsdeError, KeyError):
    pass


class ConfigError(AbsdeError, ValueError):
    pass


class ExpressionError(ConfigError):
    pass
