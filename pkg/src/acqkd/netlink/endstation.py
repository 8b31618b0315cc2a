"""Alice and Bob end-station drivers over a framed byte stream.

Bob drives the session and, in simulation mode, hosts the simulated quantum
channel: he generates the whole transcript and ships Alice's half to her in
the PARAMS message. That is a test-harness convenience, not a security
boundary. Message flow::

    Bob -> HELLO             Alice -> HELLO
    Bob -> PARAMS            Alice -> PARAMS (ack)
    Bob -> DETECTIONS        Alice -> BASIS_MATCH
    per pass:  PERM_SEED / PERM_SEED, ROW_PARITIES / PARITY_REPLY,
               BISECT_QUERY / BISECT_REPLY ...
    subset rounds: SUBSET_ROUND / PARITY_REPLY, BISECT_QUERY / BISECT_REPLY ...
    Bob -> VERIFY            Alice -> VERIFY
    Bob -> PA_PARAMS         Alice -> PA_PARAMS (echo)
    Bob -> KEY_CONFIRM       Alice -> KEY_CONFIRM

Either side may answer with ABORT instead; both then raise
:class:`~acqkd.errors.SessionAborted` carrying the same reason code.
"""

from __future__ import annotations

import hashlib
import logging
import math
import queue
import socket
import struct
import threading
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AbortReason, QKDError, SessionAborted, SessionIncomplete
from ..linkmodel import ChannelParams, DetectorParams
from ..messages import (
    Abort,
    BasisMatch,
    Detections,
    Hello,
    KeyConfirm,
    PaParams,
    Params,
    ParityReply,
    PermSeed,
    RowParities,
    BisectQuery,
    SubsetRound,
    Verify,
)
from ..pipeline import estimate_leak
from ..protocol import (
    AliceResponder,
    KeyBuffer,
    ReconcileConfig,
    Stage,
    bob_reconcile,
    bob_verify,
    output_length,
    privacy_amplify,
)
from ..protocol.sifting import single_click_indices
from ..rng import derive
from ..simengine import AliceView, BobView, decode_array, run_session
from .wire import HEADER_SIZE, FrameError, decode_payload, encode_frame, parse_header

log = logging.getLogger(__name__)

DEFAULT_PORT = 8451
DEFAULT_TIMEOUT = 30.0


def key_digest(bits) -> bytes:
    """64-bit key fingerprint: first 8 bytes of SHA-256 over the bit count (u32 BE)
    followed by the little-bit-first packed key."""
    a = np.asarray(bits, dtype=np.uint8)
    data = struct.pack(">I", a.size) + np.packbits(a, bitorder="little").tobytes()
    return hashlib.sha256(data).digest()[:8]


# transports


class SocketTransport:
    """Frames over a connected stream socket with a per-read timeout."""

    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        self.sock = sock
        self.sock.settimeout(timeout)
        self._buf = bytearray()

    def send(self, msg):
        try:
            self.sock.sendall(encode_frame(msg))
        except socket.timeout as exc:
            raise SessionIncomplete("send timed out", AbortReason.TIMEOUT) from exc
        except OSError as exc:
            raise SessionIncomplete(f"send failed: {exc}") from exc

    def _fill(self, n):
        while len(self._buf) < n:
            try:
                chunk = self.sock.recv(max(65536, n - len(self._buf)))
            except socket.timeout as exc:
                raise SessionIncomplete("peer silent past timeout", AbortReason.TIMEOUT) from exc
            except OSError as exc:
                raise SessionIncomplete(f"receive failed: {exc}") from exc
            if not chunk:
                raise SessionIncomplete("connection closed by peer")
            self._buf += chunk

    def recv(self):
        self._fill(HEADER_SIZE)
        mtype, length = parse_header(self._buf)
        self._fill(HEADER_SIZE + length)
        payload = bytes(self._buf[HEADER_SIZE:HEADER_SIZE + length])
        del self._buf[:HEADER_SIZE + length]
        return decode_payload(mtype, payload)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class LoopbackTransport:
    """In-process transport; frames are still encoded and decoded."""

    _CLOSED = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = DEFAULT_TIMEOUT):
        self.inbox = inbox
        self.outbox = outbox
        self.timeout = timeout
        self.closed = False

    @classmethod
    def pair(cls, timeout: float = DEFAULT_TIMEOUT):
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def send(self, msg):
        if self.closed:
            raise SessionIncomplete("transport closed")
        self.outbox.put(encode_frame(msg))

    def recv(self):
        if self.closed:
            raise SessionIncomplete("transport closed")
        try:
            frame = self.inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise SessionIncomplete("peer silent past timeout", AbortReason.TIMEOUT) from None
        if frame is self._CLOSED:
            self.closed = True
            raise SessionIncomplete("connection closed by peer")
        mtype, length = parse_header(frame)
        return decode_payload(mtype, frame[HEADER_SIZE:HEADER_SIZE + length])

    def close(self):
        if not self.closed:
            self.closed = True
            self.outbox.put(self._CLOSED)


# configuration


@dataclass
class SessionConfig:
    """Parameters both ends agree on through the PARAMS handshake.

    With ``simulate=True`` Bob runs the link simulation; otherwise each side
    loads its half of a pre-recorded transcript (``transcript`` arrays).
    """

    channel: ChannelParams = field(default_factory=ChannelParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    n_pulses: int = 100_000
    seed: int = 1
    row_lengths: tuple = (40, 50, 60)
    subset_stop_rounds: int = 20
    n_checks: int = 50
    estimator: str = "bb84"
    safety: int = 30
    timeout: float = DEFAULT_TIMEOUT
    simulate: bool = True
    transcript: tuple | None = None  # (alice_basis, alice_bit, bob_basis, outcome)

    def header(self):
        return {
            "channel": asdict(self.channel),
            "detector": asdict(self.detector),
            "n_pulses": self.n_pulses,
            "seed": self.seed,
            "row_lengths": list(self.row_lengths),
            "subset_stop_rounds": self.subset_stop_rounds,
            "n_checks": self.n_checks,
            "estimator": self.estimator,
            "safety": self.safety,
            "simulate": self.simulate,
        }

    @classmethod
    def from_header(cls, h, **local):
        return cls(
            channel=ChannelParams(**h["channel"]),
            detector=DetectorParams(**h["detector"]),
            n_pulses=int(h["n_pulses"]),
            seed=int(h["seed"]),
            row_lengths=tuple(h["row_lengths"]),
            subset_stop_rounds=int(h["subset_stop_rounds"]),
            n_checks=int(h["n_checks"]),
            estimator=h["estimator"],
            safety=int(h["safety"]),
            simulate=bool(h["simulate"]),
            **local,
        )

    def reconcile_config(self):
        return ReconcileConfig(self.row_lengths, self.subset_stop_rounds, perm_seed=derive(self.seed, 1))


@dataclass
class SessionResult:
    final_key: np.ndarray
    stats: dict

    @property
    def digest(self):
        return key_digest(self.final_key)


# Bob


class _RemoteChannel:
    def __init__(self, transport):
        self.t = transport

    def request(self, msg):
        self.t.send(msg)
        return self.t.recv()


def _expect(transport, cls):
    msg = transport.recv()
    if isinstance(msg, Abort):
        raise SessionAborted(msg.reason, "peer aborted")
    if not isinstance(msg, cls):
        raise SessionAborted(AbortReason.DESYNC, f"expected {cls.__name__}, got {type(msg).__name__}")
    return msg


def _abort(transport, reason):
    try:
        transport.send(Abort(reason=int(reason)))
    except QKDError:
        pass


def run_bob(transport, cfg: SessionConfig) -> SessionResult:
    """Drive a full session as Bob. Raises :class:`SessionAborted` on failure."""
    try:
        return _run_bob(transport, cfg)
    except SessionIncomplete:
        raise
    except SessionAborted as exc:
        if exc.detail != "peer aborted":
            _abort(transport, exc.reason)
        raise
    except FrameError as exc:
        _abort(transport, AbortReason.DESYNC)
        raise SessionAborted(AbortReason.DESYNC, str(exc)) from exc


def _run_bob(t, cfg: SessionConfig) -> SessionResult:
    t.send(Hello())
    _expect(t, Hello)

    if cfg.simulate:
        tr = run_session(cfg.channel, cfg.detector, cfg.n_pulses, derive(cfg.seed, 0))
        bob_view = tr.bob_view()
        t.send(Params(cfg.header(), np.asarray(tr.alice_basis), np.asarray(tr.alice_bit)))
    else:
        _, _, bb, oc = cfg.transcript
        bob_view = BobView(bb, oc)
        t.send(Params(cfg.header()))
    _expect(t, Params)

    det = single_click_indices(bob_view)
    t.send(Detections(det.astype(np.uint32), bob_view.bob_basis[det]))
    match = _expect(t, BasisMatch).matches.astype(bool)
    if match.size != det.size:
        raise SessionAborted(AbortReason.DESYNC, "BASIS_MATCH length mismatch")
    keep = det[match]
    bob = KeyBuffer(decode_array(bob_view.bob_basis[keep], bob_view.outcome[keep]))
    n_sifted = len(bob)

    channel = _RemoteChannel(t)
    rstats = bob_reconcile(bob, cfg.reconcile_config(), channel)
    if not bob_verify(bob, channel, cfg.n_checks, derive(cfg.seed, 2)):
        raise SessionAborted(AbortReason.VERIFY_FAILED, "verification parities differ")

    ber = rstats.errors_corrected / n_sifted if n_sifted else 0.5
    leak = estimate_leak(cfg.estimator, cfg.channel, cfg.detector, ber, n_sifted, len(bob), cfg.n_pulses)
    milli = math.ceil(leak.bits * 1000)
    m = output_length(len(bob), milli / 1000, cfg.safety)
    if m <= 0:
        raise SessionAborted(AbortReason.EMPTY_KEY, f"M={m}")
    pa_seed = derive(cfg.seed, 3)
    t.send(PaParams(len(bob), m, cfg.safety, pa_seed, milli))
    echo = _expect(t, PaParams)
    if (echo.n, echo.m) != (len(bob), m):
        raise SessionAborted(AbortReason.DESYNC, "PA_PARAMS echo differs")
    final = privacy_amplify(bob, milli / 1000, cfg.safety, pa_seed)

    digest = key_digest(final.bits)
    t.send(KeyConfirm(digest))
    theirs = _expect(t, KeyConfirm)
    if theirs.digest != digest:
        raise SessionAborted(AbortReason.VERIFY_FAILED, "final key digests differ")
    stats = {
        "n_pulses": len(bob_view),
        "detections": int(det.size),
        "sifted": n_sifted,
        "ber_estimate": ber,
        "disclosed": bob.disclosed,
        "reconciled": len(bob),
        "leak_fraction": leak.fraction,
        "leak_bits": milli / 1000,
        "m": m,
    }
    return SessionResult(final.bits, stats)


# Alice


_RECONCILE_TYPES = (PermSeed, RowParities, BisectQuery, SubsetRound, Verify)


def run_alice(transport, alice_record=None) -> SessionResult:
    """Answer one session as Alice.

    ``alice_record`` is ``(alice_basis, alice_bit)`` for transcript mode; in
    simulation mode it arrives in PARAMS.
    """
    try:
        return _run_alice(transport, alice_record)
    except SessionIncomplete:
        raise
    except SessionAborted as exc:
        if exc.detail != "peer aborted":
            _abort(transport, exc.reason)
        raise
    except FrameError as exc:
        _abort(transport, AbortReason.DESYNC)
        raise SessionAborted(AbortReason.DESYNC, str(exc)) from exc


def _run_alice(t, alice_record):
    _expect(t, Hello)
    t.send(Hello())

    params = _expect(t, Params)
    try:
        cfg = SessionConfig.from_header(params.header)
    except (KeyError, TypeError, ValueError, QKDError) as exc:
        raise SessionAborted(AbortReason.DESYNC, f"bad PARAMS: {exc}") from exc
    if params.alice_basis is not None:
        view = AliceView(params.alice_basis, params.alice_bit)
    elif alice_record is not None:
        view = AliceView(*alice_record)
    else:
        raise SessionAborted(AbortReason.DESYNC, "no quantum record for Alice")
    t.send(Params({"ok": True}))

    dets = _expect(t, Detections)
    idx = dets.indices.astype(np.int64)
    if idx.size and (idx.max() >= len(view) or np.any(np.diff(idx) <= 0)):
        raise SessionAborted(AbortReason.DESYNC, "detection indices invalid")
    match = view.alice_basis[idx] == dets.bases
    t.send(BasisMatch(match.astype(np.uint8)))
    key = KeyBuffer(view.alice_bit[idx[match]].astype(np.uint8))
    n_sifted = len(key)

    responder = AliceResponder(key, cfg.reconcile_config())
    while True:
        msg = t.recv()
        if isinstance(msg, Abort):
            raise SessionAborted(msg.reason, "peer aborted")
        if isinstance(msg, _RECONCILE_TYPES):
            reply = responder.handle(msg)
            t.send(reply)
            if isinstance(reply, Abort):
                raise SessionAborted(reply.reason, "out-of-phase message", ) from None
            continue
        if isinstance(msg, PaParams) and responder.phase == "verified":
            pa = msg
            break
        raise SessionAborted(AbortReason.DESYNC, f"unexpected {type(msg).__name__}")

    key = responder.key
    if pa.n != len(key) or pa.m != output_length(pa.n, pa.leak_bits_milli / 1000, pa.s) or pa.m <= 0:
        raise SessionAborted(AbortReason.DESYNC, "PA_PARAMS inconsistent with local key")
    final = privacy_amplify(key, pa.leak_bits_milli / 1000, pa.s, pa.seed)
    t.send(pa)

    confirm = _expect(t, KeyConfirm)
    digest = key_digest(final.bits)
    t.send(KeyConfirm(digest))
    if confirm.digest != digest:
        raise SessionAborted(AbortReason.VERIFY_FAILED, "final key digests differ")
    stats = {"sifted": n_sifted, "disclosed": key.disclosed, "reconciled": len(key), "m": pa.m}
    return SessionResult(final.bits, stats)


# daemons


def parse_addr(addr: str, default_port: int = DEFAULT_PORT):
    host, _, port = addr.rpartition(":")
    if not host:
        return addr or "127.0.0.1", default_port
    return host, int(port)


def serve_alice(addr=("127.0.0.1", DEFAULT_PORT), alice_record=None, timeout=DEFAULT_TIMEOUT,
                max_sessions=None, ready=None, results=None):
    """Accept connections and run one Alice session per connection, each in its own thread.

    Returns after ``max_sessions`` connections have been accepted and finished.
    ``ready`` (a :class:`threading.Event`) is set once listening; the bound
    address is then in ``ready.addr``.
    """
    srv = socket.create_server(addr)
    if ready is not None:
        ready.addr = srv.getsockname()
        ready.set()
    threads = []
    served = 0
    try:
        while max_sessions is None or served < max_sessions:
            conn, peer = srv.accept()
            served += 1

            def work(conn=conn, peer=peer):
                tr = SocketTransport(conn, timeout)
                try:
                    res = run_alice(tr, alice_record)
                    log.info("session with %s: %d-bit key", peer, res.final_key.size)
                    out = res
                except SessionAborted as exc:
                    log.warning("session with %s aborted: %s", peer, exc)
                    out = exc
                finally:
                    tr.close()
                if results is not None:
                    results.append(out)

            th = threading.Thread(target=work, daemon=True)
            th.start()
            threads.append(th)
        for th in threads:
            th.join()
    finally:
        srv.close()


def connect_bob(addr, cfg: SessionConfig) -> SessionResult:
    sock = socket.create_connection(addr, timeout=cfg.timeout)
    tr = SocketTransport(sock, cfg.timeout)
    try:
        return run_bob(tr, cfg)
    finally:
        tr.close()
