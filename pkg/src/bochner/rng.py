"""Counter-based SplitMix64 streams.

The generator is part of the reproducibility contract, so it is spelled
out here rather than delegated to numpy's bit generators:

* word ``k`` (k = 0, 1, ...) of a stream with 64-bit state ``s`` is
  ``mix(s + (k + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix`` is the
  SplitMix64 finalizer (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB).  This reproduces the sequential SplitMix64 stream.
* a stream keyed by integers ``(k1, k2, ...)`` has state
  ``s_{i+1} = mix(s_i + (k_i + 1) * golden)`` starting from ``s_0 = seed``.
* uniforms in [0, 1) are ``(w >> 11) * 2**-53``.
* normals use Box-Muller on consecutive word pairs ``(w0, w1)``:
  ``u1 = ((w0 >> 11) + 1) * 2**-53``, ``u2 = (w1 >> 11) * 2**-53``,
  giving ``sqrt(-2 ln u1) cos(2 pi u2)`` then ``sqrt(-2 ln u1) sin(2 pi u2)``.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Deterministic stream of 64-bit words, uniforms and normals."""

    def __init__(self, seed: int, *key: int):
        state = int(seed) & MASK64
        for k in key:
            state = mix64(state + (int(k) + 1) * GOLDEN)
        self.state = state
        self.counter = 0

    def words(self, count: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        self.counter += count
        z = np.uint64(self.state) + k * np.uint64(GOLDEN)
        return _mix_array(z)

    def uniform(self, count: int) -> np.ndarray:
        return (self.words(count) >> np.uint64(11)).astype(np.float64) * _INV53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        w = self.words(2 * pairs) >> np.uint64(11)
        u1 = (w[0::2].astype(np.float64) + 1.0) * _INV53
        u2 = w[1::2].astype(np.float64) * _INV53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:count]
