"""Exception hierarchy shared by all specforge modules."""


class SpecforgeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SpecforgeError):
    """An input violates a documented invariant or precondition."""


class FormatError(SpecforgeError):
    """A file does not conform to its declared binary/text layout."""


class IoError(SpecforgeError):
    """A path cannot be read or written."""


class CodecError(SpecforgeError):
    """An external codec subprocess failed.

    Carries the subprocess exit status in ``exit_status``.
    """

    def __init__(self, message, exit_status=None):
        super().__init__(message)
        self.exit_status = exit_status
