"""Pure numpy implementations of the hot kernels.

These are the reference semantics; the compiled module in ``_ckernels`` must
produce bit-identical output.
"""

from __future__ import annotations

import numpy as np

from .rng import (
    LABEL_ALICE_BASIS,
    LABEL_ALICE_BIT,
    LABEL_BOB_BASIS,
    LABEL_CLICK_D0,
    LABEL_CLICK_D1,
    N_PULSE_LABELS,
    draw,
    draw_array,
    unit_array,
)

_SHIFT63 = np.uint64(63)


def sample_pulses(key, start, n, ptable):
    """Draw ``n`` gates starting at pulse index ``start``.

    ``ptable`` has shape (2, 2, 2, 2): click probability of detector ``d``
    indexed as ``[alice_basis, alice_bit, bob_basis, d]``.

    Returns uint8 arrays ``(alice_basis, alice_bit, bob_basis, outcome)`` with
    outcome 0 = no click, 1 = D0 only, 2 = D1 only, 3 = both.
    """
    ptable = np.ascontiguousarray(ptable, dtype=np.float64)
    base = (np.arange(start, start + n, dtype=np.uint64)) * np.uint64(N_PULSE_LABELS)

    ab = (draw_array(key, base + np.uint64(LABEL_ALICE_BASIS)) >> _SHIFT63).astype(np.uint8)
    ak = (draw_array(key, base + np.uint64(LABEL_ALICE_BIT)) >> _SHIFT63).astype(np.uint8)
    bb = (draw_array(key, base + np.uint64(LABEL_BOB_BASIS)) >> _SHIFT63).astype(np.uint8)
    u0 = unit_array(draw_array(key, base + np.uint64(LABEL_CLICK_D0)))
    u1 = unit_array(draw_array(key, base + np.uint64(LABEL_CLICK_D1)))

    c0 = u0 < ptable[ab, ak, bb, 0]
    c1 = u1 < ptable[ab, ak, bb, 1]
    outcome = c0.astype(np.uint8) | (c1.astype(np.uint8) << 1)
    return ab, ak, bb, outcome


def half_subset(key, n):
    """Sorted positions of a pseudo-random subset of size ``n // 2``.

    Position ``i`` is ranked by ``draw(key, i)``; the ``n // 2`` lowest ranks
    are selected, ties broken by lower index.
    """
    k = n // 2
    if k == 0:
        return np.empty(0, dtype=np.intp)
    h = draw_array(key, np.arange(n, dtype=np.uint64))
    t = np.partition(h, k - 1)[k - 1]
    below = h < t
    need = k - int(np.count_nonzero(below))
    if need:
        eq = np.flatnonzero(h == t)[:need]
        below[eq] = True
    return np.flatnonzero(below)


def subset_parities(bits, key, m):
    """Parity of ``bits`` over the half-subsets keyed by ``draw(key, j)``, j < m."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[0]
    out = np.empty(m, dtype=np.uint8)
    for j in range(m):
        sel = half_subset(draw(key, j), n)
        out[j] = int(bits[sel].sum()) & 1
    return out
