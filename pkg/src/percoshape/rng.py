"""Pinned, documented pseudo-randomness.

Every random bit in this package comes from SplitMix64, a 64-bit
counter-style generator with a public reference implementation
(Steele, Lea & Flood 2014).  The generator is pinned here in full so
results are bit-reproducible across platforms and library versions:

* stream:      ``out(i) = finalize(key + i * GOLDEN)`` for counters
  ``i = 1, 2, ...`` and the 64-bit golden-ratio constant ``GOLDEN``;
* finalizer:   the xor-shift/multiply cascade in :func:`finalize64`;
* uniforms:    the top 53 bits of an output word scaled by 2**-53,
  giving doubles in ``[0, 1)``;
* key mixing:  :func:`mix_seed` folds a master seed with any number of
  integer or string parts (replicate indices, stage tags).  String
  parts are first reduced to 8 bytes with BLAKE2b.  Folding is
  sequential, so part order matters and streams for different stages
  never collide by construction.

Keying uniforms by *edge identity* (the canonical edge index) rather
than by draw order gives the monotone-coupling property for free: the
open set at probability ``p1 <= p2`` under a shared seed is a subset of
the open set at ``p2`` because both threshold the same uniform.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["GOLDEN", "finalize64", "mix_seed", "uniforms_at", "uniforms"]

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_U64_GOLDEN = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = float(2.0**-53)


def finalize64(state: int) -> int:
    """SplitMix64 output finalizer on a single Python integer."""
    z = state & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _finalize_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _part_word(part: int | str) -> int:
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    return int(part) & _MASK


def mix_seed(master: int, *parts: int | str) -> int:
    """Derive a stream key from a master seed and a sequence of parts.

    ``mix_seed(s)`` whitens the master seed; each extra part (replicate
    index, stage tag, ...) is folded in sequentially, so
    ``mix_seed(s, "beta", 3)`` and ``mix_seed(s, 3, "beta")`` differ.
    """
    key = finalize64(int(master) & _MASK)
    for part in parts:
        key = finalize64(((key + GOLDEN) & _MASK) ^ _part_word(part))
    return key


def uniforms_at(key: int, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) at explicit 64-bit counter positions.

    The draw at counter ``i`` is ``finalize(key + (i + 1) * GOLDEN)``,
    i.e. the (i+1)-th word of the SplitMix64 stream seeded at ``key``.
    Identity-keyed draws are the basis of the coupled-uniform scheme.
    """
    c = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(key) + (c + np.uint64(1)) * _U64_GOLDEN
    words = _finalize_array(z)
    return (words >> _S11).astype(np.float64) * _INV_2_53


def uniforms(key: int, count: int) -> np.ndarray:
    """First ``count`` uniform doubles of the stream seeded at ``key``."""
    return uniforms_at(key, np.arange(count, dtype=np.uint64))
