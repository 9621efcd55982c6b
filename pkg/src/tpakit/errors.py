"""Exception types shared across the toolkit."""


class TpaError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TpaError):
    """Raised on malformed term or model text."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


class WellformednessError(TpaError):
    """Raised when a term violates closedness or guardedness requirements."""


class IncompleteLtsError(TpaError):
    """Raised when an operation requires a complete transition system."""


class BudgetExceededError(TpaError):
    """Raised when a state or determinization budget is exhausted.

    Callers that can degrade gracefully catch this and report an
    inconclusive verdict instead of crashing.
    """


class ObserverError(TpaError):
    """Raised on ill-formed observers or letters outside a strict domain."""


class NonConvertibleTestError(TpaError):
    """Raised when a test process cannot be converted to a predicate DFA."""


class ModelError(TpaError):
    """Raised on semantic problems in a model file (bad references etc.)."""


class InternalCheckError(TpaError):
    """Raised when a built structure violates one of its own invariants."""
