"""Portable splitmix64 generator.

Output ``k`` (0-based) of a stream seeded with ``seed`` is::

    z = (seed + (k + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z = z ^ (z >> 31)

and a uniform draw on [0, 1) is ``(z >> 11) * 2**-53``. The sequence depends
only on integer arithmetic, so any language reproduces it bit for bit.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64_scalar(seed, k):
    """Reference (pure integer) implementation of output ``k``."""
    z = (seed + (k + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based splitmix64 stream.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    """

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.counter = 0

    def next_uint64(self, count):
        k = np.arange(self.counter + 1, self.counter + 1 + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + k * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def uniform(self, count):
        """``count`` doubles on [0, 1) with 53 random bits each."""
        bits = self.next_uint64(count) >> np.uint64(11)
        return bits.astype(np.float64) * 2.0**-53

    def uniform_range(self, low, high, count):
        return low + (high - low) * self.uniform(count)

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)`` driven by this stream."""
        perm = list(range(n))
        if n < 2:
            return np.array(perm, dtype=np.intp)
        u = self.uniform(n - 1)
        for idx, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[idx] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.intp)
