"""Exception hierarchy shared by every module of the package."""


class HopfError(Exception):
    """Base class for all errors raised by hopf_frh."""


class AlphaOutOfRange(HopfError, ValueError):
    def __init__(self, alpha):
        super().__init__(f"fractional order must lie in the open interval (1, 2), got {alpha!r}")
        self.alpha = alpha


class NotMonic(HopfError, ValueError):
    pass


class ConvergenceFailure(HopfError, ArithmeticError):
    pass


class DegenerateMinor(HopfError, ArithmeticError):
    pass


class NotCritical(HopfError, ValueError):
    pass


# parameter-space machinery

class WindowDegenerate(HopfError, ValueError):
    pass


class AxisUnknown(HopfError, KeyError):
    pass


class NoSignChange(HopfError, ValueError):
    pass


class SideConditionViolated(HopfError, ValueError):
    pass


class NotOnSurface(HopfError, ValueError):
    pass


class NewtonDiverged(HopfError, ArithmeticError):
    pass


class StationaryOffSurface(HopfError, ArithmeticError):
    pass


# expression language

class ExprError(HopfError):
    pass


class ExprSyntaxError(ExprError, ValueError):
    """Malformed source text.

    ``offset`` is the 1-based byte position of the offending token; a
    position one past the last character means unexpected end of input.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownFunction(ExprError, ValueError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function {name!r} at offset {offset}")


class EvalError(ExprError, ArithmeticError):
    """Evaluation failure; ``kind`` is one of DivByZero, NonFinite, Unbound."""

    def __init__(self, kind, message):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class UnboundIdentifier(EvalError):
    def __init__(self, names):
        self.names = tuple(sorted(names))
        super().__init__("Unbound", f"unbound identifier(s): {', '.join(self.names)}")


# simulator

class StepTooLarge(HopfError, ValueError):
    pass


class TrajectoryTooShort(HopfError, ValueError):
    pass
