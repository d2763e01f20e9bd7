"""Multi-step compression.

The sender compresses the residual x - v^(r-1) for R rounds, accumulating
v^(r); only the R messages cross the wire, and the receiver reconstructs the
same v^(R). On the contractive branch the accumulator adds raw decompressed
messages; on the unbiased branch it adds (1+omega)^-1 times the message and
the final value is rescaled by 1/(1 - (omega/(1+omega))^R) to restore
unbiasedness (the omega=0 scale is exactly 1 since 1 - 0^R = 1 for R >= 1).

Bitwise sender/receiver agreement is guaranteed by construction: both sides
run the identical accumulation loop in message order, with the per-message
scaling applied inside the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .compressors import (
    IDENTITY,
    RANDK,
    SCALED,
    TOPK,
    URANDK,
    CompressedMessage,
    CompressorSpec,
    _draw_indices_batched,
    _pair_count,
    compress,
    decompress,
)
from .core import RandomStream, as_vector


@dataclass(frozen=True)
class MscTranscript:
    """Everything that crosses the simulated wire for one exchange."""

    messages: list[CompressedMessage]
    r_count: int
    class_used: str  # "contractive" | "unbiased"
    omega: float | None  # unbiased branch decode parameter
    d: int


def unbiased_decode_scale(omega: float, R: int) -> float:
    return 1.0 / (1.0 - (omega / (1.0 + omega)) ** R)


def msc_send(
    x, spec: CompressorSpec, R: int, rng: RandomStream | None = None
) -> tuple[MscTranscript, np.ndarray]:
    """Run the R-round sender loop; returns the transcript and the value the
    receiver will reconstruct from it."""
    if R < 1:
        raise ValueError("R must be >= 1")
    x = as_vector(x)
    d = x.size
    branch = spec.msc_class(d)
    omega = spec.claimed_omega(d)
    inv1pw = 1.0 / (1.0 + omega) if branch == "unbiased" else None

    v = np.zeros(d, dtype=np.float64)
    messages = []
    for _ in range(R):
        msg = compress(spec, x - v, rng)
        messages.append(msg)
        if branch == "contractive":
            v += decompress(msg, d)
        else:
            v += inv1pw * decompress(msg, d)
    if branch == "unbiased":
        v = unbiased_decode_scale(omega, R) * v
    transcript = MscTranscript(
        messages=messages,
        r_count=R,
        class_used=branch,
        omega=omega if branch == "unbiased" else None,
        d=d,
    )
    return transcript, v


def msc_receive(transcript: MscTranscript, d: int) -> np.ndarray:
    """Reconstruct the sender's returned value from the transcript.

    Replays the sender's accumulation loop exactly (per-message scaling inside
    the loop, messages in order), so the result is bitwise identical.
    """
    if d != transcript.d:
        raise ValueError(f"dimension mismatch: transcript d={transcript.d}, got {d}")
    if len(transcript.messages) != transcript.r_count:
        raise ValueError("transcript message count != r_count")
    v = np.zeros(d, dtype=np.float64)
    if transcript.class_used == "contractive":
        for msg in transcript.messages:
            v += decompress(msg, d)
        return v
    inv1pw = 1.0 / (1.0 + transcript.omega)
    for msg in transcript.messages:
        v += inv1pw * decompress(msg, d)
    return unbiased_decode_scale(transcript.omega, transcript.r_count) * v


def msc_batched(
    X: np.ndarray, spec: CompressorSpec, R: int, streams
) -> tuple[np.ndarray, np.ndarray]:
    """One MSC exchange per worker row without materializing transcripts.

    Returns (out, pair_counts): out[i] is bitwise what msc_send/msc_receive
    produce for row i given the same stream; pair_counts[i, r] feeds the
    communication ledger. Kinds without a kernel fall back per worker.
    """
    n, d = X.shape
    spec.validate_for_dim(d)

    if spec.kind == TOPK:
        V = np.zeros_like(X)
        counts = _kernels.msc_topk(X, V, spec.k, R)
        return V, counts

    if spec.kind == IDENTITY:
        nonzero = np.any(X != 0.0, axis=1)
        counts = np.zeros((n, R), dtype=np.int64)
        counts[:, 0] = np.where(nonzero, d, 0)
        # X + 0.0, not X.copy(): the message path accumulates into a zero
        # vector, which normalizes -0.0 entries to +0.0
        return X + 0.0, counts

    if spec.kind == RANDK:
        idx = _draw_indices_batched(streams, n, d, spec.k, R)
        V = np.zeros_like(X)
        counts = _kernels.msc_randk(X, V, idx)
        return V, counts

    if spec.kind == URANDK:
        omega = spec.claimed_omega(d)
        idx = _draw_indices_batched(streams, n, d, spec.k, R)
        V = np.zeros_like(X)
        counts = _kernels.msc_urandk(X, V, idx, d / spec.k, 1.0 / (1.0 + omega))
        return unbiased_decode_scale(omega, R) * V, counts

    if spec.kind == SCALED and spec.inner.kind == URANDK:
        scale = 1.0 / (1.0 + spec.inner.claimed_omega(d))
        idx = _draw_indices_batched(streams, n, d, spec.inner.k, R)
        V = np.zeros_like(X)
        counts = _kernels.msc_urandk(X, V, idx, d / spec.inner.k, scale)
        return V, counts

    out = np.empty_like(X)
    counts = np.zeros((n, R), dtype=np.int64)
    for i in range(n):
        transcript, v = msc_send(X[i], spec, R, streams[i])
        out[i] = v
        counts[i] = [_pair_count(m) for m in transcript.messages]
    return out, counts
