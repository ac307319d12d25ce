"""Counter-based random streams.

Every random number used by the permutation sampler is a pure function of
``(master seed, stream words..., counter)``.  Chains can therefore be run in
any order, in any chunking, on any number of threads, and still produce
bit-identical permutations.  The mixing function is the SplitMix64 output
finalizer; a stream is the SplitMix64 sequence started at a derived key.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def word(label: str | int) -> int:
    """Stable integer for a stream label (strings hashed with crc32)."""
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label) & _MASK


def derive_key(seed: int, *words: str | int) -> int:
    """Derive a 64-bit stream key from a master seed and a path of labels."""
    k = _mix_int((int(seed) & _MASK) + _GOLDEN)
    for w in words:
        k = _mix_int(k ^ _mix_int(word(w) + _GOLDEN))
    return k


def derive_keys(base: int, ids: np.ndarray) -> np.ndarray:
    """Vectorised ``derive_key(base, id)`` for an array of integer ids."""
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        sub = _mix(ids + np.uint64(_GOLDEN))
        return _mix(np.uint64(base) ^ sub)


def uniforms(keys: np.ndarray, count: int, offset: int = 0) -> np.ndarray:
    """Return a ``(len(keys), count)`` array of uniforms in [0, 1).

    Row ``c`` holds elements ``offset .. offset+count-1`` of the stream keyed
    by ``keys[c]``.
    """
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    ctr = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(keys[:, None] + ctr[None, :] * np.uint64(_GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def generator(seed: int, *words: str | int) -> np.random.Generator:
    """A numpy Generator on a named substream of ``seed``.

    Used for data generation and model fitting, where sequential draws are
    fine and numpy's distribution samplers are wanted.
    """
    return np.random.Generator(np.random.PCG64(derive_key(seed, *words)))


def sub_seed(seed: int, *words: str | int) -> int:
    """A 63-bit integer seed for a named substream (JSON friendly)."""
    return derive_key(seed, *words) >> 1


def step_keys(keys: np.ndarray, step: int) -> np.ndarray:
    """Per-step subkeys of a batch of stream keys."""
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    with np.errstate(over="ignore"):
        s = _mix(np.array([step], dtype=np.uint64) + np.uint64(_GOLDEN))
        return _mix(keys ^ s)
