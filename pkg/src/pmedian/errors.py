"""Exception types shared across the solver."""


class PmedianError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PmedianError):
    """Malformed instance file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceError(PmedianError):
    """Instance data violates a structural requirement (e.g. disconnected graph)."""


class GuardExceeded(PmedianError):
    """A size guard refused the operation (enumeration, export, preprocessing)."""


class ContractViolation(PmedianError):
    """Caller broke an operation precondition (e.g. site mass below one)."""


class SimplexError(PmedianError):
    """LP solver failed to make progress; carries iteration diagnostics."""

    def __init__(self, message: str, iterations: int = 0):
        self.iterations = iterations
        super().__init__(f"{message} (after {iterations} iterations)")


class IterationLimit(PmedianError):
    """Cutting-plane loop hit its round cap. ``partial`` holds the state so far."""

    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class MemoryGuardExceeded(PmedianError):
    """Tree search exceeded the open-node cap. Carries the bounds reached."""

    def __init__(self, message: str, lb: float, ub: float, partial=None):
        self.lb = lb
        self.ub = ub
        self.partial = partial
        super().__init__(message)
