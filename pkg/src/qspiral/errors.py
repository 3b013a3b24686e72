"""Exception types raised across the package."""


class QSpiralError(Exception):
    """Base class for all package errors."""


class InvalidInput(QSpiralError, ValueError):
    pass


class NonConvergence(QSpiralError, ArithmeticError):
    """A series or product did not reach tolerance within ``max_terms``."""


class NearPole(QSpiralError, ArithmeticError):
    pass


class AtPole(QSpiralError, ArithmeticError):
    pass


class AtSingularity(QSpiralError, ArithmeticError):
    pass


class ParseError(QSpiralError, ValueError):
    """Coefficient DSL syntax error.

    Carries the character ``position`` and the set of tokens that would
    have been accepted there.
    """

    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = tuple(expected)
        where = "" if position is None else f" at position {position}"
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message}{where}{exp}")


class SemanticError(QSpiralError, ValueError):
    pass


class UnsupportedInput(QSpiralError, ValueError):
    pass


class TieAtThreshold(SemanticError):
    """A zero or pole modulus coincides with a splitting radius."""


class DegenerateInput(QSpiralError, ValueError):
    pass


class AnnulusTooSmall(QSpiralError, ValueError):
    pass


class ContourTooClose(QSpiralError, ArithmeticError):
    pass


class NonIntegerResult(QSpiralError, ArithmeticError):
    pass


class AllPointsSkipped(QSpiralError, RuntimeError):
    pass


class EvaluationFailure(QSpiralError, ArithmeticError):
    pass
