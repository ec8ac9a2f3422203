"""Portable seeded random stream.

The generator is xoshiro256** (Blackman & Vigna) with its 256-bit state
filled from the 64-bit seed by four successive splitmix64 outputs. Only
64-bit unsigned integer arithmetic is involved, so the draw sequence is the
same on every platform.

Derived draws:

* ``uniform``   -- ``(next() >> 11) * 2**-53``, a double in ``[0, 1)``.
* ``randbelow`` -- rejection sampling on the top ``bit_length(n - 1)`` bits
  of ``next()``; always consumes at least one raw draw, including ``n == 1``.

The state is a ``numpy.uint64`` array of length 4 so that the same state can
be advanced from Python and from compiled kernels.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into a xoshiro256** state vector."""
    x = int(seed) & _MASK64
    out = []
    for _ in range(4):
        x = (x + _GOLDEN) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    if not any(out):
        out[0] = 1  # all-zero state is a fixed point
    return np.array(out, dtype=np.uint64)


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@njit(cache=True)
def next_uniform(state):
    return np.float64(next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def next_below(state, n):
    x = next_u64(state)
    if n <= 1:
        return 0
    bits = 0
    m = n - 1
    while m > 0:
        bits += 1
        m >>= 1
    shift = np.uint64(64 - bits)
    v = np.int64(x >> shift)
    while v >= n:
        v = np.int64(next_u64(state) >> shift)
    return v


class RngStream:
    """Seeded stream with a fixed draw order; see module docstring."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = splitmix64_state(self.seed)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def uniform(self) -> float:
        return float(next_uniform(self.state))

    def randbelow(self, n: int) -> int:
        if n < 1:
            raise ValueError("randbelow needs n >= 1")
        return int(next_below(self.state, n))

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def __repr__(self):
        return f"RngStream(seed={self.seed})"
