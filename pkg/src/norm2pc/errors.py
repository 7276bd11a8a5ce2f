"""Exception hierarchy shared by every layer of the library."""


class Norm2pcError(Exception):
    """Base class for all library errors."""


class UsageError(Norm2pcError, ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class ProtocolError(Norm2pcError):
    """The two parties disagree about a protocol step (sizes, parameters)."""


class TransportError(Norm2pcError):
    """The channel was closed, timed out, or delivered a malformed frame."""


class UnsupportedOperationError(Norm2pcError):
    """The operation needs a plug-in that is not registered."""
