"""Exception hierarchy shared by all modules."""

import enum


class QKDError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameter(QKDError, ValueError):
    pass


class DegenerateConfiguration(QKDError, ValueError):
    """Parameters are individually valid but the requested quantity is undefined."""


class EmptySession(QKDError, ValueError):
    pass


class InvalidInput(QKDError, ValueError):
    pass


class ProtocolDesync(QKDError):
    pass


class VerificationFailed(QKDError):
    pass


class EmptyKey(QKDError):
    """No secure bits can be extracted (M <= 0)."""


class InfiniteMerit(QKDError, ValueError):
    """Figure of merit is unbounded (zero dark rate)."""


class FitError(QKDError):
    pass


class ChannelError(QKDError):
    """The classical channel failed underneath a protocol run."""


class AbortReason(enum.IntEnum):
    """Reason codes carried by an ABORT frame."""

    VERIFY_FAILED = 0x0001
    EMPTY_KEY = 0x0002
    DESYNC = 0x0003
    TIMEOUT = 0x0004
    TRANSPORT_LOST = 0x0005


class SessionAborted(QKDError):
    """A protocol session ended without a key; ``reason`` is an :class:`AbortReason`."""

    def __init__(self, reason, detail=""):
        self.reason = AbortReason(reason)
        self.detail = detail
        name = self.reason.name.lower().replace("_", "-")
        super().__init__(f"{name}: {detail}" if detail else name)


class SessionIncomplete(SessionAborted):
    """The channel failed or timed out mid-protocol; no key was produced."""

    def __init__(self, detail="", reason=AbortReason.TRANSPORT_LOST):
        super().__init__(reason, detail)
