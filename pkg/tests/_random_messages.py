"""Random well-formed messages of every type, driven by a numpy Generator."""

import numpy as np

from acqkd.errors import AbortReason
from acqkd.messages import (
    Abort,
    BasisMatch,
    BisectQuery,
    BisectReply,
    Detections,
    Hello,
    KeyConfirm,
    PaParams,
    Params,
    ParityReply,
    PermSeed,
    RowParities,
    SubsetRound,
    Verify,
)

U32 = 2**32
U64 = 2**64


def _u64(g):
    return int(g.integers(0, U64, dtype=np.uint64))


def _bits(g, hi=300):
    return g.integers(0, 2, int(g.integers(0, hi)), dtype=np.uint8)


def _params(g):
    header = {"seed": _u64(g), "mu": float(g.random()), "rows": [int(x) for x in g.integers(2, 99, 3)]}
    if g.random() < 0.5:
        return Params(header)
    n = int(g.integers(0, 200))
    return Params(header, g.integers(0, 2, n, dtype=np.uint8), g.integers(0, 2, n, dtype=np.uint8))


def _detections(g):
    n = int(g.integers(0, 200))
    idx = np.sort(g.choice(U32, n, replace=False)).astype(np.uint32)
    return Detections(idx, g.integers(0, 2, n, dtype=np.uint8))


def _verify(g):
    c = int(g.integers(0, 256))
    return Verify(_u64(g), c, g.integers(0, 2, c, dtype=np.uint8))


MAKERS = [
    lambda g: Hello(),
    _params,
    _detections,
    lambda g: BasisMatch(_bits(g)),
    lambda g: PermSeed(_u64(g)),
    lambda g: RowParities(_bits(g)),
    lambda g: ParityReply(_bits(g)),
    lambda g: BisectQuery(int(g.integers(0, U32)), int(g.integers(0, U32)), int(g.integers(0, 2))),
    lambda g: BisectReply(int(g.integers(0, 2))),
    lambda g: SubsetRound(_u64(g), int(g.integers(0, 2))),
    _verify,
    lambda g: PaParams(*(int(x) for x in g.integers(0, U32, 3)), _u64(g), _u64(g)),
    lambda g: KeyConfirm(g.bytes(8)),
    lambda g: Abort(AbortReason(int(g.integers(1, 6)))),
]


def random_message(g, kind=None):
    """One random message; ``kind`` indexes :data:`MAKERS` (random type when None)."""
    if kind is None:
        kind = int(g.integers(0, len(MAKERS)))
    return MAKERS[kind](g)
