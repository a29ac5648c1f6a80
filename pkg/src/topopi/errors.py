"""Exception types shared across the toolkit."""


class TopopiError(Exception):
    """Base class for all toolkit errors."""


class FormatError(TopopiError):
    """A file does not conform to its declared format.

    ``offset`` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ContractError(TopopiError):
    """An operation was called with inputs violating its preconditions."""


class EmptyContoursError(TopopiError):
    """A segmentation map contains no foreground, so no contour pixels exist."""
