from __future__ import annotations

import math

from .. import kernels
from ..errors import EmptyKey, InvalidParameter
from ..rng import STREAM_PA, derive
from .keys import KeyBuffer, Stage


def output_length(n, leak_bits, safety):
    """Final key length ``N - ceil(L) - S``."""
    if safety < 0:
        raise InvalidParameter(f"safety parameter must be >= 0, got {safety}")
    if leak_bits < 0:
        raise InvalidParameter(f"leak must be >= 0, got {leak_bits}")
    return n - math.ceil(leak_bits) - safety


def privacy_amplify(key: KeyBuffer, leak_bits: float, safety: int = 30, seed: int = 0) -> KeyBuffer:
    """Compress a verified key to ``M = N - ceil(L) - S`` bits.

    Output bit ``j`` is the parity of the ``j``-th pseudo-random subset of
    ``N // 2`` input bits; subsets depend only on ``seed`` and ``j``, so both
    ends obtain the same key from one shared seed.
    """
    key.require(Stage.VERIFIED)
    m = output_length(len(key), leak_bits, safety)
    if m <= 0:
        raise EmptyKey(f"N={len(key)}, L={leak_bits:.3f}, S={safety}: no secure bits (M={m})")
    out = kernels.subset_parities(key.bits, derive(seed, STREAM_PA), m)
    return KeyBuffer(out, key.disclosed, Stage.AMPLIFIED)
