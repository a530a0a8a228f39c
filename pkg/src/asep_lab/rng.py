"""xoshiro256** generator usable from numba kernels.

Each simulator owns a 4-word uint64 state array, so simulators never share
a stream. Transforms used by the kernels, fixed for cross-platform replay:

* uniform double: ``(r >> 11) * 2**-53`` in [0, 1)
* exponential(rate): ``-log(((r >> 11) + 1) * 2**-53) / rate``, the inverse
  CDF applied to a uniform in (0, 1]
* bounded integer in [0, n): Lemire's multiply-shift on the high 32 bits,
  with rejection, so the result is exactly uniform
* Bernoulli(p) direction: low 32 bits of the accepted word ``< floor(p*2**32)``
"""

import numba as nb
import numpy as np

_MASK32 = np.uint64(0xFFFFFFFF)
_TWO53 = 1.0 / 9007199254740992.0


def seed_state(seed: int) -> np.ndarray:
    state = np.random.SeedSequence(int(seed) & (2**64 - 1)).generate_state(4, np.uint64)
    if not state.any():
        state[0] = np.uint64(1)
    return state


def threshold32(p: float) -> np.uint64:
    return np.uint64(min(int(np.floor(p * 2.0**32)), 2**32))


@nb.njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(inline="always")
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(inline="always")
def next_double(s):
    return np.float64(next_u64(s) >> np.uint64(11)) * _TWO53


@nb.njit(inline="always")
def next_exponential(s, rate):
    u = np.float64((next_u64(s) >> np.uint64(11)) + np.uint64(1)) * _TWO53
    return -np.log(u) / rate


@nb.njit(inline="always")
def next_index_and_low(s, n):
    """Uniform index in [0, n) plus the low 32 bits of the accepted word."""
    nn = np.uint64(n)
    r = next_u64(s)
    m = (r >> np.uint64(32)) * nn
    low = m & _MASK32
    if low < nn:
        thresh = (np.uint64(4294967296) - nn) % nn
        while low < thresh:
            r = next_u64(s)
            m = (r >> np.uint64(32)) * nn
            low = m & _MASK32
    return np.int64(m >> np.uint64(32)), r & _MASK32


@nb.njit(cache=True)
def draw_u64(s, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = next_u64(s)
    return out
