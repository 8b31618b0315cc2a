"""Classical post-processing: sifting, reconciliation, verification, amplification."""

from .amplify import output_length, privacy_amplify
from .keys import KeyBuffer, Stage
from .reconcile import (
    DEFAULT_ROWS,
    ROWS_20KM,
    AliceResponder,
    LocalChannel,
    ReconcileConfig,
    ReconcileStats,
    bob_reconcile,
    bob_verify,
    reconcile,
    verify_keys,
)
from .sifting import sift, single_click_indices

__all__ = [
    "AliceResponder", "DEFAULT_ROWS", "KeyBuffer", "LocalChannel", "ROWS_20KM",
    "ReconcileConfig", "ReconcileStats", "Stage", "bob_reconcile", "bob_verify",
    "output_length", "privacy_amplify", "reconcile", "sift", "single_click_indices",
    "verify_keys",
]
