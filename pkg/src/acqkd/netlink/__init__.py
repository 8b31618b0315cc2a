"""Framed classical channel and the two end-station drivers."""

from .endstation import (
    DEFAULT_PORT,
    LoopbackTransport,
    SessionConfig,
    SessionResult,
    SocketTransport,
    connect_bob,
    key_digest,
    parse_addr,
    run_alice,
    run_bob,
    serve_alice,
)
from .wire import (
    EncodeError,
    FrameError,
    IncompleteFrame,
    MalformedPayload,
    NotOurProtocol,
    ProtocolVersionError,
    decode_frame,
    decode_prefix,
    encode_frame,
)

__all__ = [
    "DEFAULT_PORT", "EncodeError", "FrameError", "IncompleteFrame", "LoopbackTransport",
    "MalformedPayload", "NotOurProtocol", "ProtocolVersionError", "SessionConfig",
    "SessionResult", "SocketTransport", "connect_bob", "decode_frame", "decode_prefix",
    "encode_frame", "key_digest", "parse_addr", "run_alice", "run_bob", "serve_alice",
]
