"""Counter-based random streams keyed by (seed, purpose, member index).

Each stream is a Philox key derived from the seed and a purpose string.
Member ``m`` of an ensemble always reads counter block ``m``, so any
partition of the member range across workers reproduces the serial draws
bit for bit.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_LANES = 4  # uint64 outputs per Philox counter block
_TO_UNIT = 2.0 ** -53


def _key(seed: int, purpose: str) -> np.ndarray:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned value, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(purpose.encode()),))
    return ss.generate_state(2, np.uint64)


class CounterStream:
    """Uniform draws addressed by member index."""

    def __init__(self, seed: int, purpose: str):
        self.seed = int(seed)
        self.purpose = purpose
        self._key = _key(seed, purpose)

    def block(self, start: int, count: int) -> np.ndarray:
        """Uniforms in [0, 1) of shape ``(count, 4)`` for members ``start..start+count-1``."""
        bg = np.random.Philox(key=self._key, counter=[int(start), 0, 0, 0])
        raw = bg.random_raw(count * _LANES).reshape(count, _LANES)
        return (raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT

    def uniforms(self, start: int, count: int, lane: int = 0) -> np.ndarray:
        return self.block(start, count)[:, lane]

    def generator(self, member: int = 0) -> np.random.Generator:
        """A sequential generator starting at ``member``'s block."""
        return np.random.Generator(np.random.Philox(key=self._key, counter=[int(member), 0, 0, 0]))


def chunks(n: int, workers: int):
    """Contiguous ``(start, count)`` ranges covering ``range(n)``."""
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b - a)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def map_chunks(fn, n: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(start, count)`` over chunks and concatenate in order."""
    parts = chunks(n, threads)
    if len(parts) == 1:
        return fn(*parts[0])
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(pool.map(lambda p: fn(*p), parts))
    return np.concatenate(results)
