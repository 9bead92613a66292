"""Counter-based SplitMix64 generator used for all seeded weights.

The ``i``-th draw of a stream with key ``s`` is ``mix(s + (i + 1) * GAMMA)``
(arithmetic mod 2**64), which is exactly the sequence produced by the
reference sequential SplitMix64 seeded with ``s``. Being counter based, any
slice of a stream can be produced without generating its prefix, and every
named parameter gets its own stream keyed by ``mix(seed ^ fnv1a64(name))``.

Test vectors (seed 0): 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
0x06C45D188009454F.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Draws ``offset .. offset+n-1`` of the SplitMix64 stream for ``seed``."""
    counters = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK) + counters * np.uint64(GAMMA)
        return _mix(state)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def stream_key(seed: int, name: str) -> int:
    with np.errstate(over="ignore"):
        key = _mix(np.array([(seed ^ fnv1a64(name)) & _MASK], dtype=np.uint64))
    return int(key[0])


def uniform(seed: int, n: int) -> np.ndarray:
    """``n`` float64 values in ``[0, 1)`` built from the top 53 bits of each draw."""
    bits = splitmix64(seed, n) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / (1 << 53))


def named_uniform(seed: int, name: str, shape: tuple[int, ...], bound: float) -> np.ndarray:
    """Float32 array of ``shape`` drawn uniformly from ``[-bound, bound)``."""
    n = int(np.prod(shape))
    u = uniform(stream_key(seed, name), n)
    return ((2.0 * u - 1.0) * bound).reshape(shape).astype(np.float32)


def random_tensor(seed: int, name: str, shape: tuple[int, ...], low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Float32 array uniform in ``[low, high)``; used for image noise."""
    n = int(np.prod(shape))
    u = uniform(stream_key(seed, name), n)
    return (low + (high - low) * u).reshape(shape).astype(np.float32)
