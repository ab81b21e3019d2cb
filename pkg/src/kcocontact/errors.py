"""Exception hierarchy shared by every module."""


class KCocontactError(Exception):
    """Base class for all package errors."""


class ArityError(KCocontactError, ValueError):
    """Point or field dimensions do not match the declared signature."""


class NumericDomainError(KCocontactError, ArithmeticError):
    """A non-finite value appeared while evaluating a field."""


class ExpressionError(KCocontactError, ValueError):
    """A field expression uses syntax outside the primitive catalogue."""

    def __init__(self, message, text=None, col=None):
        if text is not None and col is not None:
            message = f"{message} (column {col + 1} of {text!r})"
        super().__init__(message)
        self.text = text
        self.col = col


class StructureViolation(KCocontactError):
    """The forms at a point do not define a k-cocontact structure."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class RegularityError(KCocontactError):
    """The fiber Hessian of a Lagrangian is singular."""


class LegendreInversionError(KCocontactError):
    """Newton iteration for the inverse Legendre map did not converge."""


class GridError(KCocontactError, ValueError):
    """A grid section is too small or inconsistently shaped."""


class BlowUpError(KCocontactError):
    """The integrated state became non-finite."""

    def __init__(self, message, time):
        super().__init__(f"{message} (last finite time {time:.6g})")
        self.time = time


class ConfigError(KCocontactError, ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, key=None, line=None, column=None):
        loc = []
        if key is not None:
            loc.append(f"key '{key}'")
        if line is not None:
            loc.append(f"line {line}, column {column}")
        if loc:
            message = f"{message} [{'; '.join(loc)}]"
        super().__init__(message)
        self.key = key
        self.line = line
        self.column = column


class NotAutonomousError(KCocontactError):
    """A Hamiltonian depends on the independent variables where it must not."""
