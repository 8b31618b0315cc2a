"""Classical-channel message types.

Plain value objects; the byte-level encoding lives in :mod:`acqkd.netlink.wire`.
Bit sequences are carried as uint8 numpy arrays of 0/1 values.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .errors import AbortReason


class MsgType(enum.IntEnum):
    HELLO = 0x01
    PARAMS = 0x02
    DETECTIONS = 0x03
    BASIS_MATCH = 0x04
    PERM_SEED = 0x05
    ROW_PARITIES = 0x06
    PARITY_REPLY = 0x07
    BISECT_QUERY = 0x08
    BISECT_REPLY = 0x09
    SUBSET_ROUND = 0x0A
    VERIFY = 0x0B
    PA_PARAMS = 0x0C
    KEY_CONFIRM = 0x0D
    ABORT = 0x0E


def _bits(x) -> np.ndarray:
    return np.asarray(x, dtype=np.uint8)


class Message:
    msg_type: ClassVar[MsgType]

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(eq=False)
class Hello(Message):
    msg_type: ClassVar[MsgType] = MsgType.HELLO


@dataclass(eq=False)
class Params(Message):
    """Session parameters; in simulation mode also Alice's quantum record."""

    msg_type: ClassVar[MsgType] = MsgType.PARAMS
    header: dict = field(default_factory=dict)
    alice_basis: np.ndarray | None = None
    alice_bit: np.ndarray | None = None


@dataclass(eq=False)
class Detections(Message):
    msg_type: ClassVar[MsgType] = MsgType.DETECTIONS
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint32))
    bases: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(eq=False)
class BasisMatch(Message):
    msg_type: ClassVar[MsgType] = MsgType.BASIS_MATCH
    matches: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(eq=False)
class PermSeed(Message):
    msg_type: ClassVar[MsgType] = MsgType.PERM_SEED
    seed: int = 0


@dataclass(eq=False)
class RowParities(Message):
    msg_type: ClassVar[MsgType] = MsgType.ROW_PARITIES
    parities: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(eq=False)
class ParityReply(Message):
    msg_type: ClassVar[MsgType] = MsgType.PARITY_REPLY
    parities: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(eq=False)
class BisectQuery(Message):
    msg_type: ClassVar[MsgType] = MsgType.BISECT_QUERY
    lo: int = 0
    hi: int = 0
    parity: int = 0


@dataclass(eq=False)
class BisectReply(Message):
    msg_type: ClassVar[MsgType] = MsgType.BISECT_REPLY
    parity: int = 0


@dataclass(eq=False)
class SubsetRound(Message):
    msg_type: ClassVar[MsgType] = MsgType.SUBSET_ROUND
    seed: int = 0
    parity: int = 0


@dataclass(eq=False)
class Verify(Message):
    msg_type: ClassVar[MsgType] = MsgType.VERIFY
    seed: int = 0
    count: int = 0
    parities: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(eq=False)
class PaParams(Message):
    msg_type: ClassVar[MsgType] = MsgType.PA_PARAMS
    n: int = 0
    m: int = 0
    s: int = 0
    seed: int = 0
    leak_bits_milli: int = 0


@dataclass(eq=False)
class KeyConfirm(Message):
    msg_type: ClassVar[MsgType] = MsgType.KEY_CONFIRM
    digest: bytes = b"\x00" * 8


@dataclass(eq=False)
class Abort(Message):
    msg_type: ClassVar[MsgType] = MsgType.ABORT
    reason: int = AbortReason.DESYNC


MESSAGE_CLASSES = {
    cls.msg_type: cls
    for cls in (Hello, Params, Detections, BasisMatch, PermSeed, RowParities, ParityReply,
                BisectQuery, BisectReply, SubsetRound, Verify, PaParams, KeyConfirm, Abort)
}
