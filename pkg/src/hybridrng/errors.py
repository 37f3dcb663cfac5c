"""Exception hierarchy shared by every module in the package."""


class RandomnessError(Exception):
    """Base class for all errors raised by hybridrng."""


class InvalidModulusError(RandomnessError, ValueError):
    pass


class NonInvertibleModulusError(RandomnessError, ValueError):
    """Symbol alphabet size is not a power of two, so bit expansion is lossy."""


class InsufficientSymbolsError(RandomnessError, ValueError):
    pass


class LengthMismatchError(RandomnessError, ValueError):
    pass


class DomainError(RandomnessError, ValueError):
    pass


class InvalidSeedError(RandomnessError, ValueError):
    pass


class ConfigurationError(RandomnessError, ValueError):
    pass


class SourceUnavailableError(RandomnessError, OSError):
    pass


class ExhaustedSourceError(RandomnessError):
    """A finite entropy source cannot satisfy the request."""


class InsufficientDataError(RandomnessError, ValueError):
    pass


class NotApplicableError(RandomnessError):
    """A statistical test's prerequisite check failed on this input."""


class CellBudgetExceededError(RandomnessError, ValueError):
    pass


class ParseError(RandomnessError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BlockLengthError(DomainError):
    """Approximate-entropy block length too large for the sample size."""
