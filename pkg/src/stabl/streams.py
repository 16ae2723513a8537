"""Counter-based, splittable pseudo-random streams.

A stream is identified by ``(master_seed, label, *counters)``; its j-th
uniform is a pure function of that key and j (SplitMix64 finalizer applied
to ``key + (j + 1) * GAMMA``).  No generator state is ever shared, so
draws are reproducible bit-for-bit and can be produced in any order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (wraps to 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def to_unit(z: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in the open interval (0, 1)."""
    z = np.asarray(z, dtype=np.uint64)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


@lru_cache(maxsize=1024)
def label_hash(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


def derive_key(master_seed: int, label: str, *counters: int) -> int:
    key = mix64((master_seed & MASK64) ^ label_hash(label))
    for c in counters:
        key = mix64(key + GAMMA * (int(c) + 1))
    return key


def derive_keys(master_seed: int, label: str, counters: np.ndarray, *suffix: int) -> np.ndarray:
    """Vectorized ``derive_key(master_seed, label, c, *suffix)`` over an array of counters c."""
    base = np.uint64(mix64((master_seed & MASK64) ^ label_hash(label)))
    c = np.asarray(counters, dtype=np.uint64)
    keys = mix64_array(base + np.uint64(GAMMA) * (c + np.uint64(1)))
    for extra in suffix:
        keys = mix64_array(keys + np.uint64((GAMMA * (int(extra) + 1)) & MASK64))
    return keys


def uniforms_from_keys(keys: np.ndarray, count: int, offset: int = 0) -> np.ndarray:
    """Uniforms for many streams at once: result[s, j] is draw ``offset + j`` of stream s."""
    keys = np.asarray(keys, dtype=np.uint64).reshape(-1, 1)
    steps = (np.arange(offset + 1, offset + count + 1, dtype=np.uint64) * np.uint64(GAMMA)).reshape(1, -1)
    return to_unit(mix64_array(keys + steps))


@dataclass(frozen=True)
class SeedStream:
    """An immutable handle on one deterministic stream of uniforms."""

    key: int

    @classmethod
    def from_seed(cls, master_seed: int, label: str, *counters: int) -> "SeedStream":
        return cls(derive_key(master_seed, label, *counters))

    @classmethod
    def from_xi(cls, xi: float, label: str = "xi") -> "SeedStream":
        """Expand a scalar seed xi in [0, 1) into a stream."""
        if not 0.0 <= xi < 1.0:
            raise ValueError(f"xi must lie in [0, 1), got {xi!r}")
        return cls.from_seed(int(xi * 2.0**53), label)

    def child(self, label: str, *counters: int) -> "SeedStream":
        return SeedStream(derive_key(self.key, label, *counters))

    def uniforms(self, count: int, offset: int = 0) -> np.ndarray:
        return uniforms_from_keys(np.array([self.key], dtype=np.uint64), count, offset)[0]

    def uniform(self, offset: int = 0) -> float:
        return float(self.uniforms(1, offset)[0])

    def normals(self, count: int, offset: int = 0) -> np.ndarray:
        # inverse-CDF so the variates are defined by the stream algorithm alone
        return ndtri(self.uniforms(count, offset))

    def permutation(self, n: int, offset: int = 0) -> np.ndarray:
        """Uniform random permutation of range(n): stable argsort of n uniforms."""
        return np.argsort(self.uniforms(n, offset), kind="stable")
