"""Exception hierarchy shared by every hiconn module."""


class HiconnError(Exception):
    """Base class for all library errors."""


class DivisionByZero(HiconnError, ZeroDivisionError):
    """A reciprocal (or negative power) met a zero denominator."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DomainMismatch(HiconnError, ValueError):
    pass


class ChartMismatch(HiconnError, ValueError):
    pass


class ParseError(HiconnError, ValueError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnknownIdentifier(ParseError):
    pass


class DegreeMismatch(HiconnError, ValueError):
    pass


class DegreeError(HiconnError, ValueError):
    pass


class RankDeficient(HiconnError, ValueError):
    pass


class DependentInput(HiconnError, ValueError):
    pass


class InvalidSeed(HiconnError, ValueError):
    pass


class NotInBCircle(HiconnError, ValueError):
    pass


class BaseNotTorsionFree(HiconnError, ValueError):
    pass


class VanishingNorm(HiconnError, ValueError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NotClosed(HiconnError, ValueError):
    pass


class SpecError(HiconnError, ValueError):
    """Malformed manifold spec file; carries the offending line when known."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}" + (f", column {column}" if column is not None else "") + f": {message}"
        super().__init__(message)
        self.line = line
        self.column = column
