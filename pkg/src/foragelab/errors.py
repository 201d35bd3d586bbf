"""Exception hierarchy shared by every module."""


class ForageLabError(Exception):
    """Base class for all errors raised by foragelab."""


class ConfigurationError(ForageLabError, ValueError):
    """A configuration value violates its documented constraints."""


class PlacementError(ForageLabError, RuntimeError):
    """Resources could not be placed within the retry budget."""


class ContractViolation(ForageLabError, ValueError):
    """A caller broke an operation's precondition."""


class InterfaceMismatchError(ContractViolation):
    """A genome does not match the 15-input / 3-output controller interface."""


class GenomeFormatError(ForageLabError, ValueError):
    """A genome file could not be parsed.

    ``offset`` is the byte offset into the file where parsing failed, or
    ``None`` when the failure is structural rather than syntactic.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InsufficientSamplesError(ForageLabError, ValueError):
    """A statistical test received fewer samples than it requires."""
