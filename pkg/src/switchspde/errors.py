"""Exception hierarchy shared by all modules."""


class SwitchSPDEError(Exception):
    """Base class for every error raised by the package."""


class HypothesisViolation(SwitchSPDEError):
    """Input data violates a standing assumption of a stability formula."""


# ctmc
class GeneratorError(HypothesisViolation):
    pass


class NonSquare(GeneratorError):
    pass


class NegativeOffDiagonal(GeneratorError):
    pass


class Reducible(GeneratorError):
    pass


class SingularBeyondRankOne(GeneratorError):
    pass


# jumps
class GammaOutOfRange(HypothesisViolation):
    pass


class MomentDivergence(HypothesisViolation):
    pass


class QuadratureFailure(SwitchSPDEError):
    pass


class DomainViolation(SwitchSPDEError):
    pass


# spectral
class AllZero(HypothesisViolation):
    pass


class UnderResolved(SwitchSPDEError):
    pass


# exprlang
class ExprError(SwitchSPDEError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = tuple(expected)
        if position is not None:
            message = f"{message} at position {position}"
        if self.expected:
            message += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(message)


class UnknownIdentifier(ExprError):
    def __init__(self, name, position):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at position {position}")


class UnknownFunction(ExprError):
    def __init__(self, name, position):
        self.name = name
        self.position = position
        super().__init__(f"unknown function {name!r} at position {position}")


class ExprTooDeep(ExprError):
    pass


class EvalDomainError(ExprError):
    def __init__(self, operation, operand):
        self.operation = operation
        self.operand = operand
        super().__init__(f"{operation} undefined for operand {operand!r}")


# engine / lyapunov / criteria
class NotLinear(SwitchSPDEError):
    pass


class WindowTooShort(SwitchSPDEError):
    pass


class TooFewPaths(SwitchSPDEError):
    pass


class NonpositiveD(HypothesisViolation):
    pass


class HypothesisViolated(HypothesisViolation):
    """A named inequality precondition does not hold."""

    def __init__(self, which, message):
        self.which = which
        super().__init__(message)


class BadParamPath(SwitchSPDEError):
    pass


class ScenarioError(SwitchSPDEError):
    """Scenario document failed schema validation."""


class NoImprovement(UserWarning):
    """Weight optimisation found a flat objective; uniform weights returned."""
