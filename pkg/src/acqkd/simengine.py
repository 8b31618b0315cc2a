"""Deterministic Monte Carlo of a quantum-transmission session.

Every draw for pulse ``i`` is a function of ``(seed, i, label)`` only, so a
session can be generated in index-range chunks on any number of workers and
merged into a transcript that is identical bit-for-bit to a serial run.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import kernels
from .errors import EmptySession, InvalidInput
from .linkmodel import ChannelParams, DetectorParams, PhaseEncoding, click_probabilities
from .rng import STREAM_PULSES, derive

NONE, D0, D1, BOTH = 0, 1, 2, 3
_OUTCOME_CODE = {NONE: "-", D0: "0", D1: "1", BOTH: "B"}
_CODE_OUTCOME = {v: k for k, v in _OUTCOME_CODE.items()}
CSV_HEADER = ("index", "alice_basis", "alice_bit", "bob_basis", "outcome")

_CHUNK = 1 << 20


class PulseRecord(NamedTuple):
    index: int
    alice_basis: int
    alice_bit: int
    bob_basis: int
    outcome: int | None  # None, D0 (1), D1 (2) or BOTH (3)


def probability_table(ch: ChannelParams, det: DetectorParams) -> np.ndarray:
    """Click probabilities indexed ``[alice_basis, alice_bit, bob_basis, detector]``."""
    table = np.empty((2, 2, 2, 2))
    for ab in (0, 1):
        for ak in (0, 1):
            for bb in (0, 1):
                dphi = PhaseEncoding.from_choices(ab, ak, bb).delta_phi
                table[ab, ak, bb] = click_probabilities(ch, det, dphi)
    return table


@dataclass(frozen=True)
class SessionTranscript:
    """Columnar record of a simulated session.

    Arrays are read-only; ``pulses()`` yields :class:`PulseRecord` views.
    """

    channel: ChannelParams
    detector: DetectorParams
    seed: int
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    outcome: np.ndarray
    counts: dict = field(default_factory=dict)

    def __len__(self):
        return self.outcome.shape[0]

    @property
    def n_pulses(self):
        return len(self)

    @property
    def duration(self):
        """Session length in seconds at the configured gate rate."""
        return len(self) / self.channel.pulse_rate

    def pulses(self) -> Iterator[PulseRecord]:
        for i in range(len(self)):
            o = int(self.outcome[i])
            yield PulseRecord(
                i,
                int(self.alice_basis[i]),
                int(self.alice_bit[i]),
                int(self.bob_basis[i]),
                None if o == NONE else o,
            )

    def alice_view(self):
        return AliceView(self.alice_basis, self.alice_bit)

    def bob_view(self):
        return BobView(self.bob_basis, self.outcome)

    def to_csv(self, fh=None):
        """Write the transcript as CSV; returns the text when ``fh`` is None."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        codes = np.array(["-", "0", "1", "B"])[self.outcome]
        for i in range(len(self)):
            w.writerow((i, int(self.alice_basis[i]), int(self.alice_bit[i]), int(self.bob_basis[i]), codes[i]))
        if own:
            return fh.getvalue()
        return None


@dataclass(frozen=True)
class AliceView:
    alice_basis: np.ndarray
    alice_bit: np.ndarray

    def __len__(self):
        return self.alice_basis.shape[0]


@dataclass(frozen=True)
class BobView:
    bob_basis: np.ndarray
    outcome: np.ndarray

    def __len__(self):
        return self.outcome.shape[0]


def tally(alice_basis, alice_bit, bob_basis, outcome) -> dict:
    single = (outcome == D0) | (outcome == D1)
    matched = alice_basis == bob_basis
    sifted = single & matched
    bob_bits = decode_array(bob_basis, outcome)
    errors = sifted & (bob_bits != alice_bit)
    return {
        "pulses": int(outcome.shape[0]),
        "clicks": int(np.count_nonzero(outcome)),
        "d0": int(np.count_nonzero(outcome & D0)),
        "d1": int(np.count_nonzero(outcome & D1)),
        "double": int(np.count_nonzero(outcome == BOTH)),
        "single": int(np.count_nonzero(single)),
        "matched_bases": int(np.count_nonzero(matched)),
        "sifted": int(np.count_nonzero(sifted)),
        "sifted_errors": int(np.count_nonzero(errors)),
    }


def run_session(ch: ChannelParams, det: DetectorParams, n_pulses: int, seed: int,
                workers: int = 1) -> SessionTranscript:
    """Simulate ``n_pulses`` gates of the link.

    ``workers`` only changes how the index range is partitioned; the
    transcript is identical for any value.
    """
    if n_pulses < 1:
        raise EmptySession("n_pulses must be >= 1")
    seed &= (1 << 64) - 1
    key = derive(seed, STREAM_PULSES)
    table = probability_table(ch, det)

    starts = list(range(0, n_pulses, _CHUNK))
    spans = [(s, min(_CHUNK, n_pulses - s)) for s in starts]

    def job(span):
        return kernels.sample_pulses(key, span[0], span[1], table)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, spans))  # map preserves order
    else:
        parts = [job(s) for s in spans]

    cols = [np.concatenate([p[k] for p in parts]) for k in range(4)]
    for c in cols:
        c.setflags(write=False)
    ab, ak, bb, oc = cols
    return SessionTranscript(ch, det, seed, ab, ak, bb, oc, tally(ab, ak, bb, oc))


def decode_click(bob_basis: int, outcome) -> int:
    """Bit Bob reads from a single click in his basis.

    Basis 0: D0 -> 1, D1 -> 0. Basis 1: D0 -> 0, D1 -> 1.
    """
    if outcome not in (D0, D1):
        raise InvalidInput(f"decode_click needs a single click, got {outcome!r}")
    if bob_basis not in (0, 1):
        raise InvalidInput(f"bob_basis must be 0 or 1, got {bob_basis!r}")
    return int((outcome == D1) ^ (bob_basis == 0))


def decode_array(bob_basis: np.ndarray, outcome: np.ndarray) -> np.ndarray:
    """Vectorised :func:`decode_click`; entries for non-single outcomes are meaningless."""
    return ((outcome == D1) ^ (bob_basis == 0)).astype(np.uint8)


def read_transcript_csv(fh):
    """Parse a transcript CSV into ``(alice_basis, alice_bit, bob_basis, outcome)`` arrays."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise InvalidInput(f"bad transcript header: {header!r}")
    ab, ak, bb, oc = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 5:
            raise InvalidInput(f"line {lineno}: expected 5 fields")
        if int(row[0]) != len(oc):
            raise InvalidInput(f"line {lineno}: index out of sequence")
        try:
            oc.append(_CODE_OUTCOME[row[4].strip()])
        except KeyError:
            raise InvalidInput(f"line {lineno}: bad outcome {row[4]!r}") from None
        ab.append(int(row[1]))
        ak.append(int(row[2]))
        bb.append(int(row[3]))
    return tuple(np.array(x, dtype=np.uint8) for x in (ab, ak, bb, oc))
