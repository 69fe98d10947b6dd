"""Portable deterministic random numbers.

Everything stochastic in this package (terrain synthesis, parameter init,
shuffling, augmentation, GMM sampling) draws from the generator defined here
so that fixtures reproduce bit-for-bit across platforms and numpy versions.

The generator is xoshiro256** seeded through splitmix64. Both are specified
in terms of exact 64-bit integer arithmetic, implemented below with plain
Python ints (masked to 64 bits), plus a vectorised splitmix64 hash for
filling whole rasters with white noise in one shot.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, *tags: int | str) -> int:
    """Mix ``seed`` with a sequence of tags into a new 64-bit seed.

    Used to give each epoch / tile / candidate its own independent stream.
    """
    state = seed & _MASK
    for tag in tags:
        t = _fnv1a64(tag.encode("utf-8")) if isinstance(tag, str) else tag & _MASK
        state, out = _splitmix64(state ^ t)
        state = out
    _, out = _splitmix64(state)
    return out


class Rng:
    """xoshiro256** stream, deterministic and platform independent."""

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        state = seed & _MASK
        s = []
        for _ in range(4):
            state, out = _splitmix64(state)
            s.append(out)
        self._s = s

    def fork(self, *tags: int | str) -> "Rng":
        """Child stream that does not advance this one."""
        return Rng(derive_seed(self._s[0] ^ self._s[2], *tags))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        x = (s1 * 5) & _MASK
        result = (((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Float64 in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        """Integer in [0, n). Lemire multiply-shift, exact in Python ints."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return (self.next_u64() * n) >> 64

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller, one draw per call (the pair's partner is discarded)."""
        u1 = self.random()
        while u1 == 0.0:
            u1 = self.random()
        u2 = self.random()
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return mu + sigma * float(z)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def uniform_array(self, shape: tuple[int, ...], lo: float, hi: float) -> np.ndarray:
        flat = np.empty(int(np.prod(shape)), dtype=np.float64)
        for i in range(flat.size):
            flat[i] = self.random()
        return (lo + (hi - lo) * flat).reshape(shape)


def hash_noise(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorised splitmix64 hash of indices ``offset .. offset+count``.

    Returns float64 in [0, 1). Order independent: value ``i`` depends only on
    (seed, i), so rasters filled from it are identical regardless of chunking.
    """
    idx = np.arange(offset, offset + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15) * (idx + np.uint64(1)))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
