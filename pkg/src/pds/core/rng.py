"""Seeded Gaussian noise streams.

A stream is identified by (seed, stream_id) plus an optional child path; chain
``i`` of a run owns ``root.child(i)``. Streams are backed by PCG64 seeded from a
SeedSequence spawn key, so the draw sequence does not depend on how chains are
scheduled across workers.
"""
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from pds.config import settings

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


class RngStream:

    def __init__(self, seed: int, stream_id: int = 0, path: Tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.path = tuple(int(p) for p in path)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,) + self.path)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))

    def normal(self, shape: Sequence[int]) -> np.ndarray:
        return self._generator.standard_normal(tuple(shape))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


def gaussian_noise(shape: Sequence[int], rng: RngStream) -> np.ndarray:
    return rng.normal(shape)


class StreamBundle:
    """One stream per chain, drawing batched ``(N, ...)`` noise.

    Each stream's values are pre-drawn in blocks of whole per-chain draws, which
    yields exactly the sequence of drawing them one step at a time. The bundle
    must own its streams exclusively.
    """

    def __init__(self, streams: List[RngStream]):
        if not streams:
            raise ValueError("StreamBundle needs at least one stream")
        self.streams = list(streams)
        self._buffers: Dict[Tuple[int, ...], np.ndarray] = {}
        self._cursor: Dict[Tuple[int, ...], int] = {}

    @classmethod
    def for_chains(cls, root: RngStream, n_chains: int, offset: int = 0) -> "StreamBundle":
        return cls([root.child(offset + i) for i in range(n_chains)])

    def __len__(self) -> int:
        return len(self.streams)

    def subset(self, start: int, stop: int) -> "StreamBundle":
        return StreamBundle(self.streams[start:stop])

    def _block_length(self, per_chain: int) -> int:
        budget = settings.PDS_NOISE_BUFFER_ELEMENTS // max(1, per_chain * len(self.streams))
        return int(max(1, min(64, budget)))

    def normal(self, shape: Sequence[int]) -> np.ndarray:
        shape = tuple(shape)
        if shape[0] != len(self.streams):
            raise ValueError(f"Batch dimension {shape[0]} does not match {len(self.streams)} streams")
        key = shape[1:]
        cursor = self._cursor.get(key)
        buffer = self._buffers.get(key)
        if buffer is None or cursor >= buffer.shape[1]:
            block = self._block_length(int(np.prod(key, dtype=np.int64)))
            buffer = np.stack([s.normal((block,) + key) for s in self.streams])
            self._buffers[key] = buffer
            cursor = 0
        self._cursor[key] = cursor + 1
        return buffer[:, cursor].copy()
