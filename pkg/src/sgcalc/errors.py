"""Exception hierarchy shared by all sgcalc modules."""


class SGCalcError(Exception):
    """Base class for every error raised by sgcalc."""


class PoleHit(SGCalcError, ZeroDivisionError):
    """A denominator fell below the evaluation tolerance."""


class TruncationCap(SGCalcError, ValueError):
    pass


class NotElliptic(SGCalcError):
    pass


class NotRational(SGCalcError, ValueError):
    """The expression is not a rational function of the normal covariable."""


class DegenerateFit(SGCalcError):
    pass


class LeadingCoeffVanishes(SGCalcError, ZeroDivisionError):
    pass


class RealRootDetected(SGCalcError):
    def __init__(self, message, roots=None, point=None):
        super().__init__(message)
        self.roots = roots
        self.point = point


class RealPoleOnPath(SGCalcError):
    pass


class DegreeTooHigh(SGCalcError):
    pass


class QuadratureFailure(SGCalcError):
    pass


class JetGrowthViolation(SGCalcError, ValueError):
    pass


class IllConditionedFit(SGCalcError, ValueError):
    pass


class AllZeroWindow(SGCalcError, ValueError):
    pass


class ExtensionFailure(SGCalcError):
    pass


class SingularDiscretization(SGCalcError):
    pass


class ProblemFormatError(SGCalcError, ValueError):
    """A problem or config file does not follow the expected schema."""
