"""Exception hierarchy shared by all rocone modules."""


class RoconeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RoconeError):
    """An input value violates a mathematical precondition (non-finite angle,
    non-unit complex vector, ...)."""


class DegenerateInputError(DomainError):
    """A computation hit a degenerate configuration (e.g. zero resultant
    vector in the semantic average)."""


class ContractViolationError(RoconeError):
    """Caller broke an API contract (shape mismatch, empty cone set, ...)."""


class ConfigError(RoconeError):
    """Unknown variant, bad flag value, malformed config file."""


class DataError(RoconeError):
    """Problem with on-disk data or entity/relation ids."""


class ParseError(DataError):
    """Malformed record in a data file. Carries the offending line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        loc = f"{path}:{line}: " if path else ""
        super().__init__(f"{loc}{message}")


class NumericError(RoconeError):
    """Non-finite value showed up where a finite one is required."""
