"""Block-parity reconciliation with bisection, random-subset cleanup and verification.

Bob drives the exchange and Alice answers. Both ends run the same
:class:`_KeyState` bookkeeping, so they agree on which bits are discarded
without exchanging positions: every disclosed parity claims one bit of the
set it covers (the last unclaimed one in set order), and claimed bits are
removed from both keys at the end of each phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import (
    ChannelError,
    InvalidParameter,
    ProtocolDesync,
    SessionAborted,
    SessionIncomplete,
    VerificationFailed,
)
from ..messages import (
    Abort,
    BisectQuery,
    BisectReply,
    ParityReply,
    PermSeed,
    RowParities,
    SubsetRound,
    Verify,
)
from ..rng import STREAM_PERM, STREAM_SUBSET, STREAM_VERIFY, derive, draw, hash_permutation
from .keys import KeyBuffer, Stage

DEFAULT_ROWS = (40, 50, 60)
ROWS_20KM = (12, 18, 27)
MAX_SUBSET_ROUNDS = 100_000


@dataclass(frozen=True)
class ReconcileConfig:
    row_lengths: tuple = DEFAULT_ROWS
    subset_stop_rounds: int = 20
    perm_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "row_lengths", tuple(int(k) for k in self.row_lengths))
        if not self.row_lengths:
            raise InvalidParameter("at least one block-parity pass is required")
        if any(k < 2 for k in self.row_lengths):
            raise InvalidParameter(f"row lengths must be >= 2, got {self.row_lengths}")
        if self.subset_stop_rounds < 1:
            raise InvalidParameter("subset_stop_rounds must be >= 1")

    def pass_seed(self, p):
        return draw(derive(self.perm_seed, STREAM_PERM), p)

    def subset_seed(self, r):
        return draw(derive(self.perm_seed, STREAM_SUBSET), r)


@dataclass
class ReconcileStats:
    parities_disclosed: int = 0
    bits_discarded: int = 0
    passes: int = 0
    errors_corrected: int = 0
    pass_disclosed: list = field(default_factory=list)
    subset_rounds: int = 0
    subset_disclosed: int = 0
    input_length: int = 0


def _parity(bits, idx):
    return int(bits[idx].sum()) & 1


def row_slices(n, k):
    return [(lo, min(lo + k, n) - 1) for lo in range(0, n, k)]


class _KeyState:
    """One end's view of the key during reconciliation."""

    def __init__(self, key: KeyBuffer):
        self.key = key
        self.order = None  # current ordering: pass permutation or subset positions
        self._claimed = np.zeros(len(key), dtype=bool)
        self._pending = 0

    @property
    def bits(self):
        return self.key.bits

    def __len__(self):
        return len(self.key)

    def disclose(self, positions):
        """Record one parity revealed over ``positions`` and claim a bit for discard."""
        self.key.disclosed += 1
        claimed = self._claimed
        for pos in positions[::-1]:
            if not claimed[pos]:
                claimed[pos] = True
                self._pending += 1
                return
        free = np.flatnonzero(~claimed)
        if free.size:
            claimed[free[-1]] = True
            self._pending += 1

    def commit(self):
        """Drop claimed bits; returns how many were removed."""
        n = self._pending
        if n:
            self.key.bits = self.key.bits[~self._claimed].copy()
            self._claimed = np.zeros(len(self.key), dtype=bool)
            self._pending = 0
        self.order = None
        return n

    # phase setup, identical on both ends

    def begin_pass(self, p, seed):
        self.commit()
        n = len(self)
        self.order = np.arange(n) if p == 0 else hash_permutation(seed, n)

    def row_parities(self, k):
        n = len(self)
        out = np.empty(len(row_slices(n, k)), dtype=np.uint8)
        for r, (lo, hi) in enumerate(row_slices(n, k)):
            out[r] = _parity(self.bits, self.order[lo:hi + 1])
        return out

    def disclose_rows(self, k):
        for lo, hi in row_slices(len(self), k):
            self.disclose(self.order[lo:hi + 1])

    def begin_subset(self, seed):
        self.order = kernels.half_subset(seed, len(self))

    def range_parity(self, lo, hi):
        if self.order is None or not 0 <= lo <= hi < len(self.order):
            raise ProtocolDesync(f"bisection range [{lo}, {hi}] outside current ordering")
        return _parity(self.bits, self.order[lo:hi + 1])

    def verify_parities(self, seed, count):
        """Parities of ``count`` fresh half-subsets; disclosed and committed."""
        self.commit()
        n = len(self)
        subsets = [kernels.half_subset(draw(seed, i), n) for i in range(count)]
        par = np.array([_parity(self.bits, s) for s in subsets], dtype=np.uint8)
        for s in subsets:
            self.disclose(s)
        self.commit()
        return par


class AliceResponder:
    """Alice's side of reconciliation and verification as a message handler.

    ``handle(msg)`` returns the reply; an out-of-phase message yields an
    :class:`Abort` and the responder refuses anything further.
    """

    def __init__(self, key: KeyBuffer, cfg: ReconcileConfig | None = None):
        if key.stage not in (Stage.SIFTED, Stage.RECONCILED):
            raise InvalidParameter(f"responder needs a SIFTED or RECONCILED key, got {key.stage.name}")
        self.cfg = cfg if cfg is not None else ReconcileConfig()
        self.state = _KeyState(key)
        # ready | seeded | rows | subset | reconciled | verified | failed | aborted
        self.phase = "ready" if key.stage == Stage.SIFTED else "reconciled"
        self.pass_index = -1
        self.verified = None

    @property
    def key(self):
        return self.state.key

    def _desync(self, why):
        self.phase = "aborted"
        return Abort(reason=3)

    def handle(self, msg):
        if self.phase in ("aborted", "failed"):
            return self._desync("responder closed")
        handler = {
            PermSeed: self._on_perm_seed,
            RowParities: self._on_rows,
            BisectQuery: self._on_bisect,
            SubsetRound: self._on_subset,
            Verify: self._on_verify,
        }.get(type(msg))
        if handler is None:
            return self._desync(f"unexpected {type(msg).__name__}")
        try:
            return handler(msg)
        except ProtocolDesync as exc:
            return self._desync(str(exc))

    def _on_perm_seed(self, msg):
        if self.phase not in ("ready", "rows") or self.pass_index + 1 >= len(self.cfg.row_lengths):
            return self._desync("PERM_SEED out of phase")
        self.pass_index += 1
        self.state.begin_pass(self.pass_index, msg.seed)
        self.phase = "seeded"
        return PermSeed(seed=msg.seed)

    def _on_rows(self, msg):
        if self.phase != "seeded":
            return self._desync("ROW_PARITIES out of phase")
        k = self.cfg.row_lengths[self.pass_index]
        mine = self.state.row_parities(k)
        if len(msg.parities) != len(mine):
            return self._desync("row count mismatch")
        self.state.disclose_rows(k)
        self.phase = "rows"
        return ParityReply(parities=mine)

    def _on_bisect(self, msg):
        if self.phase not in ("rows", "subset"):
            return self._desync("BISECT_QUERY out of phase")
        par = self.state.range_parity(msg.lo, msg.hi)
        self.state.disclose(self.state.order[msg.lo:msg.hi + 1])
        return BisectReply(parity=par)

    def _on_subset(self, msg):
        if self.phase == "rows":
            if self.pass_index != len(self.cfg.row_lengths) - 1:
                return self._desync("SUBSET_ROUND before all passes")
            self.state.commit()
        elif self.phase != "subset":
            return self._desync("SUBSET_ROUND out of phase")
        self.phase = "subset"
        self.state.begin_subset(msg.seed)
        par = _parity(self.state.bits, self.state.order)
        self.state.disclose(self.state.order)
        return ParityReply(parities=np.array([par], dtype=np.uint8))

    def _on_verify(self, msg):
        last_pass = self.pass_index == len(self.cfg.row_lengths) - 1
        if not (self.phase in ("subset", "reconciled", "verified") or (self.phase == "rows" and last_pass)):
            return self._desync("VERIFY out of phase")
        if self.phase in ("subset", "rows"):
            self.state.commit()
            self.key.advance(Stage.RECONCILED)
        mine = self.state.verify_parities(msg.seed, msg.count)
        ok = np.array_equal(mine, np.asarray(msg.parities, dtype=np.uint8))
        self.verified = ok
        if ok:
            self.key.advance(Stage.VERIFIED)
            self.phase = "verified"
        else:
            self.phase = "failed"
        return Verify(seed=msg.seed, count=msg.count, parities=mine)


class LocalChannel:
    """In-memory channel: requests go straight to an :class:`AliceResponder`."""

    def __init__(self, responder: AliceResponder):
        self.responder = responder

    def request(self, msg):
        return self.responder.handle(msg)


def _ask(channel, msg, reply_type):
    try:
        reply = channel.request(msg)
    except (ChannelError, OSError, EOFError) as exc:
        raise SessionIncomplete(f"channel failed during {type(msg).__name__}: {exc}") from exc
    if isinstance(reply, Abort):
        raise SessionAborted(reply.reason, f"peer aborted on {type(msg).__name__}")
    if not isinstance(reply, reply_type):
        raise SessionAborted(3, f"expected {reply_type.__name__}, got {type(reply).__name__}")
    return reply


def _bisect(state: _KeyState, channel, lo, hi, stats):
    """Locate and flip one error within ``order[lo..hi]`` whose parities disagree."""
    while lo < hi:
        mid = (lo + hi) // 2
        mine = state.range_parity(lo, mid)
        reply = _ask(channel, BisectQuery(lo=lo, hi=mid, parity=mine), BisectReply)
        state.disclose(state.order[lo:mid + 1])
        if reply.parity != mine:
            hi = mid
        else:
            lo = mid + 1
    pos = state.order[lo]
    state.bits[pos] ^= 1
    stats.errors_corrected += 1


def bob_reconcile(bob: KeyBuffer, cfg: ReconcileConfig, channel) -> ReconcileStats:
    """Run Bob's side of reconciliation against ``channel``; modifies ``bob`` in place."""
    bob.require(Stage.SIFTED)
    stats = ReconcileStats(input_length=len(bob))
    state = _KeyState(bob)
    start = bob.disclosed

    for p, k in enumerate(cfg.row_lengths):
        before = bob.disclosed
        seed = cfg.pass_seed(p)
        _ask(channel, PermSeed(seed=seed), PermSeed)
        state.begin_pass(p, seed)
        mine = state.row_parities(k)
        theirs = _ask(channel, RowParities(parities=mine), ParityReply).parities
        if len(theirs) != len(mine):
            raise SessionAborted(3, "row count mismatch")
        state.disclose_rows(k)
        for r in np.flatnonzero(np.asarray(theirs, dtype=np.uint8) != mine):
            lo = int(r) * k
            hi = min(lo + k, len(state)) - 1
            _bisect(state, channel, lo, hi, stats)
        stats.pass_disclosed.append(bob.disclosed - before)
        stats.passes += 1
    state.commit()

    before = bob.disclosed
    clean = 0
    r = 0
    while clean < cfg.subset_stop_rounds and len(state) >= 2 and r < MAX_SUBSET_ROUNDS:
        seed = cfg.subset_seed(r)
        r += 1
        state.begin_subset(seed)
        mine = _parity(state.bits, state.order)
        reply = _ask(channel, SubsetRound(seed=seed, parity=mine), ParityReply)
        state.disclose(state.order)
        if int(reply.parities[0]) == mine:
            clean += 1
        else:
            clean = 0
            _bisect(state, channel, 0, len(state.order) - 1, stats)
    state.commit()
    stats.subset_rounds = r
    stats.subset_disclosed = bob.disclosed - before
    stats.parities_disclosed = bob.disclosed - start
    stats.bits_discarded = stats.input_length - len(bob)
    bob.advance(Stage.RECONCILED)
    return stats


def bob_verify(bob: KeyBuffer, channel, n_checks: int = 50, seed: int = 0) -> bool:
    """Compare ``n_checks`` fresh random-subset parities with Alice."""
    bob.require(Stage.RECONCILED)
    if not 0 <= n_checks <= 255:
        raise InvalidParameter("n_checks must fit in one byte")
    vseed = derive(seed, STREAM_VERIFY)
    state = _KeyState(bob)
    mine = state.verify_parities(vseed, n_checks)
    reply = _ask(channel, Verify(seed=vseed, count=n_checks, parities=mine), Verify)
    ok = np.array_equal(np.asarray(reply.parities, dtype=np.uint8), mine)
    if ok:
        bob.advance(Stage.VERIFIED)
    return ok


def reconcile(alice: KeyBuffer, bob: KeyBuffer, cfg: ReconcileConfig = ReconcileConfig(), channel=None):
    """Reconcile two sifted keys held in one process.

    ``channel`` defaults to a :class:`LocalChannel` around Alice's key; any
    object with ``request(msg) -> reply`` works. Returns
    ``(alice, bob, stats)`` with both keys at stage RECONCILED.
    """
    if len(alice) != len(bob):
        raise ProtocolDesync(f"key lengths differ: {len(alice)} vs {len(bob)}")
    responder = AliceResponder(alice, cfg)
    if channel is None:
        channel = LocalChannel(responder)
    stats = bob_reconcile(bob, cfg, channel)
    responder.state.commit()
    alice.advance(Stage.RECONCILED)
    return alice, bob, stats


def verify_keys(alice: KeyBuffer, bob: KeyBuffer, n_checks: int = 50, seed: int = 0) -> bool:
    """Confirm two reconciled keys agree on ``n_checks`` random-subset parities.

    Both keys lose one bit per check. On success both move to VERIFIED.
    """
    alice.require(Stage.RECONCILED)
    responder = AliceResponder(alice)
    ok = bob_verify(bob, LocalChannel(responder), n_checks, seed)
    return ok and bool(responder.verified)
