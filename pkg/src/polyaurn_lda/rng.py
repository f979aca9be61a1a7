"""Deterministic derivation of independent random streams.

Every phase of the sampler draws from its own xoshiro256++ stream whose
256-bit state is derived from (master seed, role tag, iteration, index)
through splitmix64 mixing.  Streams therefore never depend on thread
scheduling, and a run is reproducible from its seed alone.
"""

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_PATH = 0xD2B74407B1CE6E93

# role tags used as the first path element
INIT = 1
PHI = 2
Z = 3
SYNTH = 4
DEMO = 5
GENERIC = 6


def _mix(z):
    """splitmix64 finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def derive_state(seed, *path):
    """256-bit xoshiro256++ state from a master seed and a stream path."""
    x = _mix((seed & MASK64) ^ _GOLDEN)
    for p in path:
        x = _mix(x ^ ((p & MASK64) * _PATH & MASK64))
    out = np.empty(4, dtype=np.uint64)
    for i in range(4):
        x = (x + _GOLDEN) & MASK64
        out[i] = _mix(x)
    if not out.any():
        out[0] = _GOLDEN
    return out
