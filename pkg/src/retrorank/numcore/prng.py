"""Deterministic 64-bit PRNG (SplitMix64) with labeled substreams.

SplitMix64 is a published shift/multiply generator (Steele, Lea & Flood
2014; the java.util.SplittableRandom finalizer), so streams can be
reproduced from the seed alone in any language.  Substreams are derived
from the master seed plus an FNV-1a hash of a purpose label, which keeps
e.g. parameter init independent of how often dropout was called.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 output function: avalanche a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    """FNV-1a hash of a label, used to derive substream seeds."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class Prng:
    """SplitMix64 stream.  Identical seeds give identical streams."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = seed & _MASK64

    def substream(self, label: str) -> "Prng":
        """Independent child stream for a named purpose.

        Derivation is pure in (seed, label): it does not consume from or
        advance this stream.
        """
        return Prng(mix64(self.seed ^ fnv1a64(label)))

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def randrange(self, n: int) -> int:
        """Uniform int in [0, n).  Plain modulo; the bias at 64 bits is
        far below anything observable at corpus scale."""
        if n <= 0:
            raise ValueError(f"randrange needs n >= 1, got {n}")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, consuming one draw per position."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.randrange(len(items))]

    # vectorized fills -- produce exactly the same values as the scalar
    # calls would, then advance the state past them

    def fill_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
        z = np.uint64(self._state) + steps
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK64
        return z

    def fill_uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Array of uniforms in [lo, hi), stream-equivalent to repeated
        uniform() calls read in row-major order."""
        n = int(np.prod(shape)) if shape else 1
        u = (self.fill_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        out = lo + (hi - lo) * u
        return out.reshape(shape)
