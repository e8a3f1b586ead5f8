"""Counter-based random streams for reproducible trajectory ensembles.

Each trajectory owns one stream keyed by (master seed, trajectory index);
the i-th variate is a pure function of (key, i), so results do not depend
on scheduling or worker count.  The generator is the splitmix64 finalizer
applied to an incrementing counter, which passes standard statistical
batteries and is cheap enough to call inside the propagation kernel.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = ["stream_key", "uniform", "normal_pair", "Stream"]

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = float(1 << 53)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_key(master_seed, index):
    """Key of the stream for one trajectory (or scan point)."""
    a = _mix64(np.uint64(master_seed))
    b = _mix64(np.uint64(index) ^ np.uint64(0xD1B54A32D192ED03))
    return _mix64(a ^ (b * _GOLDEN))


@njit(cache=True, inline="always")
def uniform(key, counter):
    """The counter-th uniform variate in [0, 1) of the stream ``key``."""
    u = _mix64((np.uint64(key) + np.uint64(counter) * _GOLDEN) & _MASK)
    return float(u >> np.uint64(11)) / _TWO53


@njit(cache=True, inline="always")
def normal_pair(key, counter):
    """Two standard normal variates via Box-Muller, consuming counters
    ``counter`` and ``counter + 1``."""
    u1 = 1.0 - uniform(key, counter)          # (0, 1]
    u2 = uniform(key, counter + np.uint64(1))
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


class Stream:
    """Stateful convenience wrapper around the counter-based stream."""

    def __init__(self, master_seed: int, index: int):
        self.key = np.uint64(stream_key(np.uint64(master_seed % 2 ** 64),
                                        np.uint64(index)))
        self.counter = 0

    def uniform(self) -> float:
        u = uniform(self.key, np.uint64(self.counter))
        self.counter += 1
        return u

    def normal(self, loc: float = 0.0, scale: float = 1.0) -> float:
        z, _ = normal_pair(self.key, np.uint64(self.counter))
        self.counter += 2
        return loc + scale * z

    def normals(self, n: int, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
        return np.array([self.normal(loc, scale) for _ in range(n)])
