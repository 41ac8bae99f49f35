"""Exception hierarchy shared by every module of the package."""


class IsaError(Exception):
    """Base class for all package errors."""


class DomainViolation(IsaError, ValueError):
    """An atom was applied to an interval leaving its natural domain.

    ``node`` is set when the violation was raised while evaluating an
    expression DAG, so callers can report which node failed.
    """

    def __init__(self, op, interval, node=None):
        self.op = op
        self.interval = interval
        self.node = node
        where = f" at node {node}" if node is not None else ""
        super().__init__(f"{op} undefined on {interval}{where}")


class NotNested(IsaError, ValueError):
    pass


class ParseError(IsaError, ValueError):
    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownIdentifier(ParseError):
    pass


class ArityError(ParseError):
    pass


class GridMismatch(IsaError, ValueError):
    pass


class PointOutsideDomain(IsaError, ValueError):
    pass


class BudgetExceeded(IsaError, RuntimeError):
    """Raised by the set-inversion engines when the iteration cap is hit.

    The partial subpaving computed so far is attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class CapExceeded(IsaError, RuntimeError):
    pass
