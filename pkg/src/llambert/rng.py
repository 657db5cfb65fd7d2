"""Deterministic 64-bit PRNG and hashing used everywhere randomness or
stable content hashes are needed.

The generator is SplitMix64 (Steele, Lea & Flood's mixer). It is tiny, has a
full 64-bit state, and its output sequence is fixed for a given seed on every
platform, which is what lets golden files pin sampler outputs.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def fold_bits(h: int, d: int) -> int:
    """XOR-fold a 64-bit hash down to d bits."""
    mask = (1 << d) - 1
    out = 0
    while h:
        out ^= h & mask
        h >>= d
    return out


class SplitMix64:
    """Seedable deterministic PRNG; one 64-bit word of state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / (1 << 53)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n); rejection sampling, no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, n: int) -> list:
        """n items without replacement via partial Fisher-Yates shuffle."""
        if n < 0 or n > len(items):
            raise ValueError(f"cannot sample {n} from {len(items)} items")
        pool = list(items)
        for i in range(n):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:n]


def subseed(seed: int, *parts) -> int:
    """Derive an independent 64-bit seed from a base seed and context parts."""
    tag = ":".join([str(seed)] + [str(p) for p in parts])
    return fnv1a64(tag.encode("utf-8"))
