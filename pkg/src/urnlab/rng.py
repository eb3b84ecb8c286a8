"""Counter-based Philox4x32-10 generator keyed by (seed, replica, step).

Draw ``t`` of replica ``i`` under seed ``s`` is fully determined by the triple,
so replicas can be simulated in any order, on any number of workers, and a
single step can be replayed in isolation.

Layout: key = (s mod 2^32, s div 2^32); counter = (b mod 2^32, b div 2^32,
i mod 2^32, i div 2^32) with block ``b = t // 2``.  The four output words
``(a0, a1, a2, a3)`` give two 64-bit draws, ``a0 a1`` for even ``t`` and
``a2 a3`` for odd ``t``.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_M32 = np.uint64(0xFFFFFFFF)


@nb.njit(inline="always")
def _round(c0, c1, c2, c3, k0, k1):
    p0 = np.uint64(0xD2511F53) * c0
    p1 = np.uint64(0xCD9E8D57) * c2
    return (((p1 >> np.uint64(32)) ^ c1 ^ k0), (p1 & np.uint64(0xFFFFFFFF)),
            ((p0 >> np.uint64(32)) ^ c3 ^ k1), (p0 & np.uint64(0xFFFFFFFF)))


@nb.njit(inline="always")
def philox(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds on 32-bit words held in uint64."""
    w0 = np.uint64(0x9E3779B9)
    w1 = np.uint64(0xBB67AE85)
    m = np.uint64(0xFFFFFFFF)
    for _ in range(9):
        c0, c1, c2, c3 = _round(c0, c1, c2, c3, k0, k1)
        k0 = (k0 + w0) & m
        k1 = (k1 + w1) & m
    return _round(c0, c1, c2, c3, k0, k1)


@nb.njit(inline="always")
def mulhi(x, tot):
    """``floor(x * tot / 2^64)`` for uint64 ``x`` and ``tot``."""
    m = np.uint64(0xFFFFFFFF)
    s = np.uint64(32)
    xh = x >> s
    xl = x & m
    if tot <= m:
        hi = xh * tot
        lo = xl * tot
        return (hi + (lo >> s)) >> s
    th = tot >> s
    tl = tot & m
    hl = xh * tl
    lh = xl * th
    mid = ((xl * tl) >> s) + (hl & m) + (lh & m)
    return xh * th + (hl >> s) + (lh >> s) + (mid >> s)


@nb.njit(cache=True)
def _philox_words(c0, c1, c2, c3, k0, k1):
    return philox(np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3),
                  np.uint64(k0), np.uint64(k1))


@nb.njit(cache=True)
def _draw(seed, replica, step):
    m = np.uint64(0xFFFFFFFF)
    s = np.uint64(32)
    seed = np.uint64(seed)
    rep = np.uint64(replica)
    b = np.uint64(step) >> np.uint64(1)
    a0, a1, a2, a3 = philox(b & m, b >> s, rep & m, rep >> s, seed & m, seed >> s)
    if step & 1:
        return (a2 << s) | a3
    return (a0 << s) | a1


@nb.njit(cache=True)
def _index(x, tot):
    return np.int64(mulhi(np.uint64(x), np.uint64(tot)))


def philox4x32(counter, key) -> tuple[int, int, int, int]:
    """Raw Philox4x32-10 block for four counter words and two key words."""
    out = _philox_words(*[int(c) for c in counter], *[int(k) for k in key])
    return tuple(int(w) for w in out)


class CounterRNG:
    """Random stream of one replica; draws are addressed by step number.

    Parameters
    ----------
    seed : int
        Base seed, ``0 <= seed < 2**64``.
    replica : int
        Replica index, ``0 <= replica < 2**64``.
    """

    def __init__(self, seed: int, replica: int = 0):
        if not 0 <= seed < 2**64 or not 0 <= replica < 2**64:
            raise ValueError("seed and replica must lie in [0, 2**64)")
        self.seed = int(seed)
        self.replica = int(replica)

    def __repr__(self):
        return f"CounterRNG(seed={self.seed}, replica={self.replica})"

    def raw(self, step: int) -> int:
        """The 64-bit word used at ``step``."""
        return int(_draw(np.uint64(self.seed), np.uint64(self.replica),
                         np.int64(step)))

    def index(self, step: int, total: int) -> int:
        """Uniform integer in ``[0, total)`` for ``step``."""
        return int(_index(np.uint64(self.raw(step)), np.uint64(total)))

    def uniform(self, step: int) -> float:
        return (self.raw(step) >> 11) * 2.0**-53
