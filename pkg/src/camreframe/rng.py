"""Deterministic random numbers via SplitMix64 + Box-Muller.

The generator is fully specified so independent reimplementations agree
bit-for-bit on the integer stream:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state
    z <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z <- (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output <- z XOR (z >> 31)

Uniform doubles are (output >> 11) * 2^-53 in [0, 1).  Gaussian draws use
the Box-Muller transform on consecutive uniform pairs, with the first
uniform of each pair clamped away from zero.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix_u64(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of SplitMix64 seeded with `seed`."""
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = base + idx * _GAMMA
        return _mix(states)


def derive_seed(seed: int, *tags: int) -> int:
    """Fold integer tags into a seed; used for per-step noise streams."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for tag in tags:
            s = _mix((s + _GAMMA) ^ np.uint64(tag & 0xFFFFFFFFFFFFFFFF))
    return int(s)


def uniform(seed: int, count: int) -> np.ndarray:
    """`count` doubles in [0, 1) from the SplitMix64 stream."""
    return (splitmix_u64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gaussian(seed: int, shape) -> np.ndarray:
    """Standard normal array of the given shape (Box-Muller, float64)."""
    n = int(np.prod(shape))
    pairs = (n + 1) // 2
    u = uniform(seed, 2 * pairs)
    u1 = np.maximum(u[0::2], 2.0**-53)
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n].reshape(shape)
