"""Exception types raised across the package."""


class LCMatchError(Exception):
    """Base class for all package errors."""


class StudyError(LCMatchError, ValueError):
    """Malformed cohort input."""


class MissingColumn(StudyError):
    pass


class NonBinaryTreatment(StudyError):
    pass


class NonFiniteValue(StudyError):
    pass


class InvalidStudy(StudyError):
    """Raised when a Study fails validation; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DimensionMismatch(LCMatchError, ValueError):
    pass


class SingularCovariance(LCMatchError, ArithmeticError):
    pass


class RankDeficient(LCMatchError, ArithmeticError):
    pass


class Separation(LCMatchError, ArithmeticError):
    """Logistic fit diverged (complete or quasi-complete separation)."""


class DegenerateCaliper(LCMatchError, ValueError):
    pass


class Degenerate(LCMatchError, ArithmeticError):
    """Standardized difference with a zero denominator."""


class InfeasibleAssignment(LCMatchError, ValueError):
    pass


class NoOutcome(LCMatchError, ValueError):
    pass


class EmptyMatch(LCMatchError, ValueError):
    pass


class AllDegenerateStrata(LCMatchError, ArithmeticError):
    pass


class DegenerateDraw(LCMatchError, RuntimeError):
    pass
