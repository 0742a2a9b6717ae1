"""Exception hierarchy.

Every error raised by the library derives from :class:`MEBandsError`.  The two
intermediate classes decide the CLI exit code: :class:`DataError` (bad or
unusable input data, exit 3) and :class:`NumericError` (a numeric precondition
failed, exit 4).
"""


class MEBandsError(Exception):
    exit_code = 4

    @property
    def kind(self) -> str:
        return type(self).__name__


class DataError(MEBandsError, ValueError):
    exit_code = 3


class NumericError(MEBandsError, ValueError):
    exit_code = 4


# sample data
class TooFewPoints(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class ParseError(DataError):
    pass


class UnimputableDay(DataError):
    pass


class InsufficientYears(DataError):
    pass


class MissingValues(DataError):
    pass


# mean excess / plots
class NoExceedance(NumericError):
    pass


class BadTruncation(NumericError):
    pass


class NonpositiveNormalizer(NumericError):
    pass


class DegenerateNormalizer(NumericError):
    pass


class BadXi(NumericError):
    pass


class OutOfSupport(NumericError):
    pass


class InfiniteMean(NumericError):
    pass


# stochastic / quantiles
class BadParam(NumericError):
    pass


class GridTooCoarse(NumericError):
    pass


class IncompatibleCase(NumericError):
    pass


class NotCovered(NumericError):
    pass


# bands
class QuantileMismatch(NumericError):
    pass


class BadAlphaSplit(NumericError):
    pass


class CaseMismatch(NumericError):
    pass


# estimators
class NonpositiveOrderStat(NumericError):
    pass


class DegenerateSpacing(NumericError):
    pass


class NegativeRatio(NumericError):
    pass


class EmptyRange(NumericError):
    pass


# preprocess
class ZeroDayVariance(NumericError):
    pass


class DegenerateSeries(NumericError):
    pass
