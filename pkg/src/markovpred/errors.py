"""Exception hierarchy.

Everything derives from ``MarkovPredictionError`` (itself a ``ValueError``) so
callers can catch the whole family at once.
"""


class MarkovPredictionError(ValueError):
    pass


class NotStochastic(MarkovPredictionError):
    pass


class ReducibleChain(MarkovPredictionError):
    pass


class NotReversible(MarkovPredictionError):
    pass


class DegenerateStationary(MarkovPredictionError):
    pass


class NotADistribution(MarkovPredictionError):
    pass


class TooLarge(MarkovPredictionError):
    pass


class InfiniteRisk(MarkovPredictionError):
    pass


class ZeroProbabilityTrajectory(MarkovPredictionError):
    pass


class WrongAlphabet(MarkovPredictionError):
    pass


class ParameterOutOfRange(MarkovPredictionError):
    pass


class NotSymmetric(MarkovPredictionError):
    pass


class GammaTooLarge(MarkovPredictionError):
    pass


class HorizonTooSmall(MarkovPredictionError):
    pass


class IndexOutOfRange(MarkovPredictionError):
    pass


class CountExceedsTrials(MarkovPredictionError):
    pass


class NotInClass(MarkovPredictionError):
    pass


class EmptyPrior(MarkovPredictionError):
    pass


class InvalidCounts(MarkovPredictionError):
    pass


class NoConditioningMass(MarkovPredictionError):
    pass


class ConfigError(MarkovPredictionError):
    pass
