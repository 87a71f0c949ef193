"""Binary erasure channel simulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ReceivedWord:
    """Channel output: transmitted bits plus an erasure mask.

    Non-erased positions are bit-exact copies of the transmitted word; the
    erasure pattern depends only on (seed, length, epsilon).
    """

    bits: np.ndarray
    erased: np.ndarray
    epsilon: float
    seed: int

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def values(self) -> np.ndarray:
        """Tri-state view: 0, 1, or -1 for erased."""
        out = self.bits.astype(np.int8)
        out[self.erased] = -1
        return out

    @property
    def erasure_count(self) -> int:
        return int(self.erased.sum())


def transmit(codeword: np.ndarray, epsilon: float, seed: int) -> ReceivedWord:
    """Send `codeword` through a BEC(epsilon) with a dedicated RNG stream."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon={epsilon} outside [0, 1]")
    codeword = (np.asarray(codeword) & 1).astype(np.uint8)
    rng = np.random.default_rng(seed)
    erased = rng.random(len(codeword)) < epsilon
    return ReceivedWord(bits=codeword.copy(), erased=erased, epsilon=epsilon, seed=seed)


def erase_positions(codeword: np.ndarray, positions) -> ReceivedWord:
    """Deterministic erasure pattern; used by tests that need exact patterns."""
    codeword = (np.asarray(codeword) & 1).astype(np.uint8)
    erased = np.zeros(len(codeword), dtype=bool)
    erased[list(positions)] = True
    return ReceivedWord(bits=codeword.copy(), erased=erased, epsilon=float("nan"), seed=-1)
