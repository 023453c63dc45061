"""Counter-based Gaussian noise: Widynski's ``squares64`` keyed by the run seed.

Every normal draw is a pure function of ``(key, counter)``, so the noise a
trajectory sees at step ``s`` on site ``i`` is fixed by the seed alone and
replicas with different seeds never share a stream.  The compiled kernel
implements the identical arithmetic.
"""
from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
TWO_PI = 6.283185307179586


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def key_from_seed(seed: int) -> int:
    """Odd 64-bit key with well-mixed bits derived from a user seed."""
    return splitmix64(int(seed) & _M64) | 1


def squares64(ctr: np.ndarray, key: int) -> np.ndarray:
    ctr = np.asarray(ctr, dtype=np.uint64)
    k = np.uint64(key)
    s32 = np.uint64(32)
    with np.errstate(over="ignore"):
        y = ctr * k
        x = y.copy()
        z = y + k
        x = x * x + y
        x = (x >> s32) | (x << s32)
        x = x * x + z
        x = (x >> s32) | (x << s32)
        x = x * x + y
        x = (x >> s32) | (x << s32)
        t = x * x + z
        x = (t >> s32) | (t << s32)
        return t ^ ((x * x + y) >> s32)


def normals(ctr: np.ndarray, key: int) -> np.ndarray:
    """Standard normals for the given counters (Box-Muller, cosine branch)."""
    ctr = np.asarray(ctr, dtype=np.uint64)
    two = np.uint64(2)
    a = squares64(ctr * two, key)
    b = squares64(ctr * two + np.uint64(1), key)
    u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)
    u2 = (b >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def uniforms(ctr: np.ndarray, key: int) -> np.ndarray:
    """Uniforms on [0, 1) with 53-bit resolution."""
    a = squares64(np.asarray(ctr, dtype=np.uint64), key)
    return (a >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
