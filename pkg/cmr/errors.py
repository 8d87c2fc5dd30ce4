from typing import Optional


class CmrError(Exception):
    """Base class for every error the library raises on purpose"""

    exit_code = 5


class ParameterError(CmrError, ValueError):
    exit_code = 2


class MissingDataError(CmrError):
    exit_code = 3


class PayloadFormatError(CmrError):
    exit_code = 4


class AlgebraError(CmrError):
    exit_code = 5


class FieldMismatchError(AlgebraError):
    pass


class DivisionByZeroError(AlgebraError, ZeroDivisionError):
    pass


class SingularSystemError(AlgebraError):
    def __init__(self, message: str, rank: Optional[int] = None, expected: Optional[int] = None):
        super().__init__(message)
        self.rank = rank
        self.expected = expected

    @property
    def deficiency(self) -> Optional[int]:
        if self.rank is None or self.expected is None:
            return None
        return self.expected - self.rank


class InconsistentSystemError(AlgebraError):
    pass


class InterpolationError(AlgebraError):
    pass


class ScheduleError(AlgebraError):
    pass


class VerificationError(AlgebraError):
    def __init__(self, message: str, detail: Optional[str] = None):
        super().__init__(message if detail is None else f"{message}: {detail}")
        self.detail = detail
