"""Bit-exact frame encoding for the classical channel.

Frame layout (all integers big-endian)::

    magic    4 bytes  b"QKD1"
    version  1 byte   0x01
    msg_type 1 byte
    length   4 bytes  payload size
    payload  length bytes

Bitsets are a u32 bit count followed by ``ceil(count / 8)`` bytes, bit ``i``
stored in byte ``i // 8`` at bit position ``i % 8`` (least significant bit
first); unused high bits of the last byte are zero. Payload schemas per
message type are in :data:`PAYLOAD_SCHEMAS`.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import QKDError
from ..messages import (
    MESSAGE_CLASSES,
    Abort,
    BasisMatch,
    BisectQuery,
    BisectReply,
    Detections,
    Hello,
    KeyConfirm,
    MsgType,
    PaParams,
    Params,
    ParityReply,
    PermSeed,
    RowParities,
    SubsetRound,
    Verify,
)

MAGIC = b"QKD1"
VERSION = 0x01
HEADER = struct.Struct(">4sBBI")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 0xFFFFFFFF

PAYLOAD_SCHEMAS = {
    MsgType.HELLO: "empty",
    MsgType.PARAMS: "u32 header_len, header (UTF-8 JSON), [bitset alice_basis, bitset alice_bit]",
    MsgType.DETECTIONS: "u32 count, count x u32 sorted pulse index, bitset bob bases",
    MsgType.BASIS_MATCH: "bitset match flags",
    MsgType.PERM_SEED: "u64 seed",
    MsgType.ROW_PARITIES: "bitset parities",
    MsgType.PARITY_REPLY: "bitset parities",
    MsgType.BISECT_QUERY: "u32 lo, u32 hi, u8 parity",
    MsgType.BISECT_REPLY: "u8 parity",
    MsgType.SUBSET_ROUND: "u64 seed, u8 parity",
    MsgType.VERIFY: "u64 seed, u8 count, ceil(count/8) bytes packed parities",
    MsgType.PA_PARAMS: "u32 N, u32 M, u32 S, u64 seed, u64 leak_bits_milli",
    MsgType.KEY_CONFIRM: "8 bytes digest",
    MsgType.ABORT: "u16 reason",
}


class FrameError(QKDError):
    pass


class NotOurProtocol(FrameError):
    pass


class IncompleteFrame(FrameError):
    """Not enough bytes yet; retry with more data."""


class ProtocolVersionError(FrameError):
    pass


class MalformedPayload(FrameError):
    pass


class EncodeError(FrameError):
    pass


def _pack_bits(bits) -> bytes:
    a = np.asarray(bits, dtype=np.uint8)
    if a.size and a.max() > 1:
        raise EncodeError("bitset values must be 0 or 1")
    return struct.pack(">I", a.size) + np.packbits(a, bitorder="little").tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise MalformedPayload("payload shorter than its schema")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def bits(self, n=None):
        if n is None:
            (n,) = self.unpack(">I")
        raw = np.frombuffer(self.take((n + 7) // 8), dtype=np.uint8)
        out = np.unpackbits(raw, bitorder="little")
        if out[n:].any():
            raise MalformedPayload("nonzero padding bits in bitset")
        return out[:n].copy()

    def done(self):
        if self.pos != len(self.buf):
            raise MalformedPayload(f"{len(self.buf) - self.pos} trailing payload bytes")


def _bit(x):
    if x not in (0, 1):
        raise EncodeError(f"parity must be 0 or 1, got {x!r}")
    return int(x)


def _u(fmt, *vals):
    try:
        return struct.pack(fmt, *vals)
    except struct.error as exc:
        raise EncodeError(str(exc)) from None


def encode_payload(msg) -> bytes:
    t = type(msg)
    if t is Hello:
        return b""
    if t is Params:
        hdr = json.dumps(msg.header, sort_keys=True, separators=(",", ":")).encode()
        out = _u(">I", len(hdr)) + hdr
        if (msg.alice_basis is None) != (msg.alice_bit is None):
            raise EncodeError("alice_basis and alice_bit must be given together")
        if msg.alice_basis is not None:
            out += _pack_bits(msg.alice_basis) + _pack_bits(msg.alice_bit)
        return out
    if t is Detections:
        idx = np.asarray(msg.indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() > 0xFFFFFFFF):
            raise EncodeError("pulse index outside u32 range")
        if len(msg.bases) != idx.size:
            raise EncodeError("one basis bit per detection required")
        return _u(">I", idx.size) + idx.astype(">u4").tobytes() + _pack_bits(msg.bases)
    if t is BasisMatch:
        return _pack_bits(msg.matches)
    if t is PermSeed:
        return _u(">Q", msg.seed)
    if t in (RowParities, ParityReply):
        return _pack_bits(msg.parities)
    if t is BisectQuery:
        return _u(">IIB", msg.lo, msg.hi, _bit(msg.parity))
    if t is BisectReply:
        return _u(">B", _bit(msg.parity))
    if t is SubsetRound:
        return _u(">QB", msg.seed, _bit(msg.parity))
    if t is Verify:
        if len(msg.parities) != msg.count:
            raise EncodeError("VERIFY count must equal number of parities")
        return _u(">QB", msg.seed, msg.count) + _pack_bits(msg.parities)[4:]
    if t is PaParams:
        return _u(">IIIQQ", msg.n, msg.m, msg.s, msg.seed, msg.leak_bits_milli)
    if t is KeyConfirm:
        if len(msg.digest) != 8:
            raise EncodeError("digest must be 8 bytes")
        return bytes(msg.digest)
    if t is Abort:
        return _u(">H", int(msg.reason))
    raise EncodeError(f"not a message: {msg!r}")


def decode_payload(msg_type: MsgType, payload: bytes):
    r = _Reader(payload)
    if msg_type == MsgType.HELLO:
        msg = Hello()
    elif msg_type == MsgType.PARAMS:
        (n,) = r.unpack(">I")
        try:
            header = json.loads(r.take(n).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedPayload(f"PARAMS header: {exc}") from None
        if not isinstance(header, dict):
            raise MalformedPayload("PARAMS header must be a JSON object")
        ab = ak = None
        if r.pos < len(r.buf):
            ab = r.bits()
            ak = r.bits()
        msg = Params(header, ab, ak)
    elif msg_type == MsgType.DETECTIONS:
        (n,) = r.unpack(">I")
        idx = np.frombuffer(r.take(4 * n), dtype=">u4").astype(np.uint32)
        bases = r.bits()
        if bases.size != n:
            raise MalformedPayload("basis count differs from detection count")
        msg = Detections(idx, bases)
    elif msg_type == MsgType.BASIS_MATCH:
        msg = BasisMatch(r.bits())
    elif msg_type == MsgType.PERM_SEED:
        msg = PermSeed(*r.unpack(">Q"))
    elif msg_type == MsgType.ROW_PARITIES:
        msg = RowParities(r.bits())
    elif msg_type == MsgType.PARITY_REPLY:
        msg = ParityReply(r.bits())
    elif msg_type == MsgType.BISECT_QUERY:
        msg = BisectQuery(*r.unpack(">IIB"))
    elif msg_type == MsgType.BISECT_REPLY:
        msg = BisectReply(*r.unpack(">B"))
    elif msg_type == MsgType.SUBSET_ROUND:
        msg = SubsetRound(*r.unpack(">QB"))
    elif msg_type == MsgType.VERIFY:
        seed, count = r.unpack(">QB")
        msg = Verify(seed, count, r.bits(count))
    elif msg_type == MsgType.PA_PARAMS:
        msg = PaParams(*r.unpack(">IIIQQ"))
    elif msg_type == MsgType.KEY_CONFIRM:
        msg = KeyConfirm(r.take(8))
    elif msg_type == MsgType.ABORT:
        msg = Abort(*r.unpack(">H"))
    else:  # pragma: no cover - guarded by caller
        raise ProtocolVersionError(f"unknown message type {msg_type}")
    r.done()
    for name in ("parity",):
        if hasattr(msg, name) and getattr(msg, name) not in (0, 1):
            raise MalformedPayload("parity byte must be 0 or 1")
    return msg


def encode_frame(msg) -> bytes:
    payload = encode_payload(msg)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError("payload exceeds 2**32 - 1 bytes")
    return HEADER.pack(MAGIC, VERSION, int(msg.msg_type), len(payload)) + payload


def parse_header(data: bytes):
    """Validate a frame header; returns ``(msg_type, payload_length)``."""
    if len(data) < HEADER_SIZE:
        if not MAGIC.startswith(bytes(data[:4])):
            raise NotOurProtocol(f"bad magic {bytes(data[:4])!r}")
        raise IncompleteFrame(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    magic, version, mtype, length = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise NotOurProtocol(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolVersionError(f"unsupported version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise ProtocolVersionError(f"unknown message type 0x{mtype:02x}") from None
    return mtype, length


def decode_frame(data: bytes):
    """Decode exactly one frame occupying all of ``data``."""
    msg, used = decode_prefix(data)
    if used != len(data):
        raise MalformedPayload(f"{len(data) - used} bytes after frame")
    return msg


def decode_prefix(data: bytes):
    """Decode the first frame in ``data``; returns ``(msg, bytes_consumed)``."""
    mtype, length = parse_header(data)
    end = HEADER_SIZE + length
    if len(data) < end:
        raise IncompleteFrame(f"need {end} bytes, have {len(data)}")
    return decode_payload(mtype, bytes(data[HEADER_SIZE:end])), end


assert set(MESSAGE_CLASSES) == set(PAYLOAD_SCHEMAS)
