"""Deterministic random numbers on a counter-based (Philox) generator.

Philox streams are platform stable and depend only on the key, so equal
seeds give bitwise-equal draws everywhere. `split` derives an independent
child stream from a string tag, which keeps sampling for one purpose
(init, batches, noise, ...) unaffected by draws made for another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


class Rng:
    """Seeded wrapper around numpy's Philox bit generator."""

    def __init__(self, seed: int, _stream: int = 0):
        self.seed = int(seed)
        self._stream = int(_stream)
        key = (self.seed & 0xFFFFFFFFFFFFFFFF) | (self._stream << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, tag: str) -> "Rng":
        """Independent child generator addressed by `tag`."""
        return Rng(self.seed, _stream=self._stream ^ _tag_to_int(tag))

    def normal(self, shape=(), std: float = 1.0) -> np.ndarray:
        return self._gen.standard_normal(size=shape, dtype=np.float64) * std

    def truncated_normal(self, shape=(), std: float = 1.0) -> np.ndarray:
        """Normal draws redrawn while outside +-2 std (weight init convention)."""
        out = self._gen.standard_normal(size=shape, dtype=np.float64)
        bad = np.abs(out) > 2.0
        while bad.any():
            out[bad] = self._gen.standard_normal(size=int(bad.sum()), dtype=np.float64)
            bad = np.abs(out) > 2.0
        return out * std

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self.permutation(n)[:k]
