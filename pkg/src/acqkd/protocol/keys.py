from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameter


class Stage(enum.IntEnum):
    SIFTED = 1
    RECONCILED = 2
    VERIFIED = 3
    AMPLIFIED = 4


@dataclass
class KeyBuffer:
    """Ordered key bits plus the count of parities revealed about them.

    ``stage`` only moves forward; see :meth:`advance`.
    """

    bits: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))
    disclosed: int = 0
    stage: Stage = Stage.SIFTED

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)

    def __len__(self):
        return self.bits.shape[0]

    def advance(self, stage: Stage):
        if stage < self.stage:
            raise InvalidParameter(f"cannot move key from {self.stage.name} back to {stage.name}")
        self.stage = stage

    def copy(self):
        return KeyBuffer(self.bits.copy(), self.disclosed, self.stage)

    def require(self, stage: Stage):
        if self.stage != stage:
            raise InvalidParameter(f"key is {self.stage.name}, expected {stage.name}")
