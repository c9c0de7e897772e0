"""Exception hierarchy shared by every module."""


class PDError(Exception):
    """Base class for all errors raised by pdtradeoff."""


class InvalidDistribution(PDError, ValueError):
    pass


class NegativeWeight(InvalidDistribution):
    pass


class SumNotOne(InvalidDistribution):
    pass


class InvalidAlphabet(PDError, ValueError):
    pass


class AlphabetMismatch(PDError, ValueError):
    pass


class MissingValues(PDError, ValueError):
    pass


class GridTooNarrow(PDError, ValueError):
    pass


class NonPositiveSigma(PDError, ValueError):
    pass


class InvalidDistortion(PDError, ValueError):
    pass


class NonMonotoneRegion(PDError, ArithmeticError):
    pass


class InvertibleDegradation(PDError, ValueError):
    """The degradation has point-mass posteriors, so a stability probe is vacuous."""


class NotApplicable(PDError, ValueError):
    pass


class InfeasibleDistortion(PDError, ValueError):
    pass


class TooLarge(PDError, ValueError):
    pass


class ZeroA(PDError, ZeroDivisionError):
    pass


class DuplicateName(PDError, ValueError):
    pass


class NotConverged(PDError, ArithmeticError):
    pass


class IoFailure(PDError, OSError):
    pass


class InvalidRecord(PDError, ValueError):
    """A score record is malformed (bad header, non-numeric or non-finite score)."""
