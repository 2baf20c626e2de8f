"""Vectorised Philox4x32-10 and the normal variates drawn from it.

Every variate is a pure function of ``(key, counter)`` so draws can be
addressed by coordinate and evaluated in any order or batch shape.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(counter, key, rounds=10):
    """Apply Philox4x32 to broadcastable counter words.

    ``counter`` is a sequence of four integer arrays (the counter words),
    ``key`` a pair of 32-bit integers.  Returns four ``uint64`` arrays
    holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for r in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ k0,
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ k1,
            p0 & _MASK,
        )
        if r + 1 < rounds:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def seed_key(master_seed):
    s = int(master_seed) & 0xFFFFFFFFFFFFFFFF
    return (s & 0xFFFFFFFF, s >> 32)


def _unit_open(hi, lo):
    # 53 random bits mapped to the open interval (0, 1)
    bits = (hi << np.uint64(21)) ^ (lo >> np.uint64(11))
    bits &= np.uint64((1 << 53) - 1)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def _block_words(master_seed, tag, replica, particle, first_block, n_blocks):
    replica = np.asarray(replica, dtype=np.int64)[..., None]
    particle = np.asarray(particle, dtype=np.int64)[..., None]
    block = np.arange(first_block, first_block + n_blocks, dtype=np.int64)
    hi_tag = (int(tag) & 0xFF) | ((block >> 32) << 8)
    return philox4x32(
        (block & 0xFFFFFFFF, particle, replica, hi_tag), seed_key(master_seed)
    )


def _block_range(offset, n):
    first = int(offset) // 2
    last = (int(offset) + int(n) + 1) // 2
    return first, last - first, int(offset) - 2 * first


def normal_stream(master_seed, tag, replica, particle, n, offset=0):
    """Entries ``offset, ..., offset + n - 1`` of normal streams.

    ``replica`` and ``particle`` broadcast against each other; the result
    has their broadcast shape plus a trailing axis of length ``n``.  Entry
    ``i`` of a stream depends only on ``(master_seed, tag, replica,
    particle, i)``.
    """
    first, n_blocks, skip = _block_range(offset, n)
    x0, x1, x2, x3 = _block_words(
        master_seed, tag, replica, particle, first, n_blocks
    )
    rad = np.sqrt(-2.0 * np.log(_unit_open(x0, x1)))
    ang = (2.0 * np.pi) * _unit_open(x2, x3)
    out = np.empty(rad.shape[:-1] + (2 * n_blocks,))
    out[..., 0::2] = rad * np.cos(ang)
    out[..., 1::2] = rad * np.sin(ang)
    return out[..., skip : skip + n]


def uniform_stream(master_seed, tag, replica, particle, n, offset=0):
    """Uniform (0, 1) analogue of :func:`normal_stream`."""
    first, n_blocks, skip = _block_range(offset, n)
    x0, x1, x2, x3 = _block_words(
        master_seed, tag, replica, particle, first, n_blocks
    )
    out = np.empty(x0.shape[:-1] + (2 * n_blocks,))
    out[..., 0::2] = _unit_open(x0, x1)
    out[..., 1::2] = _unit_open(x2, x3)
    return out[..., skip : skip + n]
