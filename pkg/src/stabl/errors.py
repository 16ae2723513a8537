"""Exception hierarchy shared by all stabl modules."""


class StablError(Exception):
    """Base class; the CLI maps every subclass to exit code 2."""


class ConfigurationError(StablError, ValueError):
    """A scheme, learner or experiment is configured outside its valid range."""


class DomainError(StablError, ValueError):
    """An operation received data outside its mathematical domain."""


class EnumerationTooLargeError(StablError):
    """Exact enumeration would exceed the configured class limit."""

    def __init__(self, required: int, limit: int):
        self.required = required
        self.limit = limit
        super().__init__(
            f"support has {required} bag classes, exceeding limit {limit}; "
            f"pass limit >= {required} or use Monte Carlo mode"
        )


class PrecisionError(StablError):
    """A truncated enumeration would discard more mass than allowed."""


class DegenerateSchemeError(StablError):
    """The scheme includes every point with probability one (p = 1)."""


class ParseError(StablError, ValueError):
    """Malformed input file or specification string."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HypothesisViolatedError(StablError):
    """A bound was requested outside the hypotheses that make it valid."""


class FitError(StablError):
    """A base-learner fit failed inside an ensemble; ``bag`` is the failing bag index."""

    def __init__(self, bag: int, cause: BaseException):
        self.bag = bag
        super().__init__(f"fit on bag {bag} failed: {type(cause).__name__}: {cause}")
