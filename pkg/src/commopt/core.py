"""Deterministic numeric substrate.

Dense float64 vectors, splittable reproducible random streams, and the
progress measure ``prog`` used by the hard-instance diagnostics. Everything
here is pure: a stream is a function of (master_seed, path) and nothing else.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_STREAM_TAG = b"commopt.stream.v1"
_SHARED_PREFIX = "shared"
_WORKER_ERASED = -1


def as_vector(values, d: int | None = None) -> np.ndarray:
    """Validate a DenseVector: 1-d float64, finite entries, length >= 1.

    Returns a C-contiguous float64 copy/view. Used at module boundaries; the
    interior math works on plain ndarrays.
    """
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("dense vector must be 1-d with length >= 1")
    if d is not None and x.size != d:
        raise ValueError(f"expected length {d}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("dense vector contains non-finite entries")
    return x


def _stream_key(master_seed: int, path: tuple[int, int, int, str]) -> int:
    trial, worker, rnd, purpose = path
    tag = purpose.encode("utf-8")
    buf = (
        _STREAM_TAG
        + struct.pack(">Qqqqq", master_seed & 0xFFFFFFFFFFFFFFFF, trial, worker, rnd, len(tag))
        + tag
    )
    digest = hashlib.blake2b(buf, digest_size=16).digest()
    return int.from_bytes(digest, "little")


class RandomStream:
    """Counter-based stream addressed by (master_seed, path).

    path = (trial, worker, round, purpose). A purpose starting with "shared"
    erases the worker id, so all workers derive the identical stream for a
    given round; shared-randomness compressors rely on this.
    """

    __slots__ = ("master_seed", "path", "gen")

    def __init__(self, master_seed: int, path: tuple[int, int, int, str]):
        trial, worker, rnd, purpose = path
        purpose = str(purpose)
        if purpose.startswith(_SHARED_PREFIX):
            worker = _WORKER_ERASED
        self.master_seed = int(master_seed)
        self.path = (int(trial), int(worker), int(rnd), purpose)
        key = _stream_key(self.master_seed, self.path)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def normal(self, size=None) -> np.ndarray:
        return self.gen.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self.gen.random(size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.master_seed}, path={self.path})"


def derive_stream(master_seed: int, path: tuple[int, int, int, str]) -> RandomStream:
    """Pure constructor: identical (master_seed, path) -> identical stream."""
    return RandomStream(master_seed, path)


class StreamContext:
    """Stream factory scoped to one (master_seed, trial, algorithm) cell.

    Composes purposes as ``f"{purpose}/{scope}"`` with the purpose first, so
    a "shared..." purpose keeps its prefix and still erases the worker id.
    Algorithms draw one stream per (worker, purpose) at round 0 and consume
    it sequentially across rounds; only explicitly per-round randomness
    (shared sparsifier masks) re-derives at the current round.
    """

    __slots__ = ("master_seed", "trial", "scope")

    def __init__(self, master_seed: int, trial: int, scope: str):
        self.master_seed = int(master_seed)
        self.trial = int(trial)
        self.scope = str(scope)

    def worker(self, worker: int, purpose: str) -> RandomStream:
        return derive_stream(
            self.master_seed, (self.trial, worker, 0, f"{purpose}/{self.scope}")
        )

    def shared(self, rnd: int, purpose: str) -> RandomStream:
        if not purpose.startswith(_SHARED_PREFIX):
            raise ValueError("shared streams require a purpose starting with 'shared'")
        return derive_stream(
            self.master_seed, (self.trial, _WORKER_ERASED, rnd, f"{purpose}/{self.scope}")
        )

    def child(self, suffix: str) -> "StreamContext":
        return StreamContext(self.master_seed, self.trial, f"{self.scope}/{suffix}")


def prog(x) -> int:
    """Largest 1-based index of a nonzero entry; 0 for the zero vector.

    The nonzero test is exact (entry != 0.0, no tolerance): the zero-chain
    hard instances rely on exact zero propagation.
    """
    nz = np.flatnonzero(np.asarray(x))
    return int(nz[-1]) + 1 if nz.size else 0
