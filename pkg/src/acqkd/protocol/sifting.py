from __future__ import annotations

import numpy as np

from ..errors import ProtocolDesync
from ..simengine import D0, D1, decode_array
from .keys import KeyBuffer, Stage


def single_click_indices(bob_view) -> np.ndarray:
    """Pulse indices where exactly one of Bob's detectors fired."""
    oc = bob_view.outcome
    return np.flatnonzero((oc == D0) | (oc == D1))


def sift(alice_view, bob_view):
    """Basis reconciliation.

    Keeps pulses with a single click and matching bases, in pulse order.
    Returns ``(alice_key, bob_key, indices)``.
    """
    if len(alice_view) != len(bob_view):
        raise ProtocolDesync(
            f"session length mismatch: alice {len(alice_view)} vs bob {len(bob_view)}"
        )
    det = single_click_indices(bob_view)
    keep = det[alice_view.alice_basis[det] == bob_view.bob_basis[det]]
    alice = KeyBuffer(alice_view.alice_bit[keep].astype(np.uint8), 0, Stage.SIFTED)
    bob = KeyBuffer(decode_array(bob_view.bob_basis[keep], bob_view.outcome[keep]), 0, Stage.SIFTED)
    return alice, bob, keep
