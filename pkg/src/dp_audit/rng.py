"""Counter-based 64-bit random numbers.

Every draw is a pure function of ``(key, index)``: the key is obtained by
hashing a seed together with stream identifiers, and the value at position
``index`` is the SplitMix64 finalizer applied to ``key + (index + 1) * GOLDEN``.
Nothing depends on the platform RNG, so a seed reproduces the same stream
bit-for-bit on any machine, and streams can be split by hashing
``(seed, stream_id, trial_index)`` without any shared state.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
GOLDEN = 0x9E37_79B9_7F4A_7C15
_M1 = 0xBF58_476D_1CE4_E5B9
_M2 = 0x94D0_49BB_1331_11EB

# 2**-53; uniforms are ((bits >> 11) + 0.5) * 2**-53, strictly inside (0, 1).
_INV53 = 1.0 / 9007199254740992.0


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash a sequence of integers into a single 64-bit key.

    ``derive_seed(seed, stream, index)`` is how independent sub-streams are
    split off a master seed. Negative parts are reduced modulo 2**64.
    """
    h = 0x6A09_E667_F3BC_C909
    for part in parts:
        h = _mix_int(h ^ _mix_int((int(part) & MASK64) + GOLDEN))
    return h


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64, which is what SplitMix64 needs.
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class CounterRNG:
    """Stateless-by-construction generator keyed by a 64-bit integer.

    The ``offset`` attribute is the only state: it advances by the number of
    values consumed so that successive calls on the same instance never reuse
    a counter. Two instances built from the same key produce the same values.
    """

    def __init__(self, key: int, offset: int = 0):
        self.key = int(key) & MASK64
        self.offset = int(offset)

    @classmethod
    def from_seed(cls, seed: int, *stream: int) -> "CounterRNG":
        return cls(derive_seed(seed, *stream))

    def bits(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit values as ``uint64``."""
        idx = np.arange(self.offset + 1, self.offset + count + 1, dtype=np.uint64)
        self.offset += count
        z = np.uint64(self.key) + idx * np.uint64(GOLDEN)
        return _mix_array(z)

    def uniform(self, count: int) -> np.ndarray:
        """``count`` doubles in the open interval (0, 1)."""
        b = self.bits(count) >> np.uint64(11)
        return (b.astype(np.float64) + 0.5) * _INV53

    def integers(self, upper: int, count: int) -> np.ndarray:
        """Integers in ``[0, upper)`` by multiply-shift on the top 32 bits.

        The bias is at most ``upper / 2**32``, negligible for the index
        ranges used here (``upper`` well below 2**24).
        """
        if upper < 1 or upper > 2**32:
            raise ValueError(f"upper must be in [1, 2**32], got {upper}")
        top = self.bits(count) >> np.uint64(32)
        return ((top * np.uint64(upper)) >> np.uint64(32)).astype(np.int64)
