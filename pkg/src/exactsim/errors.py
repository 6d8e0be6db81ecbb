class ExactSimError(Exception):
    pass


class GraphFormatError(ExactSimError, ValueError):
    """Raised for unparseable edge lists and corrupt binary caches."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RefusalError(ExactSimError):
    """A guard (node cap, sample budget) refused to run the computation."""


class BudgetExceededError(RefusalError):
    pass


class QueryTimeoutError(RefusalError):
    """Raised when a query runs past its configured wall-clock limit."""
