"""Counter-based random streams.

Every random quantity in the package is a pure function of a 64-bit key and
a counter, so any slice of a stream can be regenerated independently of the
rest. The mixing function is the SplitMix64 finalizer; a stream value is

    draw(key, counter) = mix64(key + GOLDEN * (counter + 1))    (mod 2**64)

and sub-streams are keyed by ``derive(key, label) = mix64(key ^ mix64(label))``.
Both the compiled and the numpy kernels implement exactly this recipe.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Stream labels; keep stable, they are part of the reproducibility contract.
STREAM_PULSES = 0x5055_4C53  # "PULS"
STREAM_PERM = 0x5045_524D
STREAM_SUBSET = 0x5355_4253
STREAM_VERIFY = 0x5645_5246
STREAM_PA = 0x5041_4D50

# Per-pulse draw labels.
N_PULSE_LABELS = 8
LABEL_ALICE_BASIS = 0
LABEL_ALICE_BIT = 1
LABEL_BOB_BASIS = 2
LABEL_CLICK_D0 = 3
LABEL_CLICK_D1 = 4

_TWO_M53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive(key: int, label: int) -> int:
    """Key of the sub-stream ``label`` of ``key``."""
    return mix64((key & MASK64) ^ mix64(label))


def draw(key: int, counter: int) -> int:
    return mix64((key + GOLDEN * (counter + 1)) & MASK64)


def to_unit(h: int) -> float:
    return (h >> 11) * _TWO_M53


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def draw_array(key: int, counters: np.ndarray) -> np.ndarray:
    """Vectorised :func:`draw` over a uint64 counter array."""
    c = counters.astype(np.uint64, copy=False) + np.uint64(1)
    return mix64_array(np.uint64(key & MASK64) + np.uint64(GOLDEN) * c)


def unit_array(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * _TWO_M53


def hash_permutation(key: int, n: int) -> np.ndarray:
    """Pseudo-random permutation of ``range(n)``: indices ranked by hash value.

    Ties (vanishingly rare) are broken by index, so the result is exact.
    """
    h = draw_array(key, np.arange(n, dtype=np.uint64))
    return np.argsort(h, kind="stable")
