"""Pure-NumPy reference implementation of the hot MSC accumulation loops.

The compiled twin (``_fastkern.pyx``) implements the same contracts with the
same floating-point operation order; all randomness (index selections) is
drawn by the caller and passed in, so the two implementations are
bit-identical. See tests/test_kernels.py for the equivalence suite.

Conventions shared by both implementations:
  * X (n, d): per-worker targets, read-only.
  * V (n, d): per-worker accumulators, zero on entry, updated in place over R
    rounds. The caller applies any final decode scaling.
  * counts (n, R): number of transmitted (index, value) pairs per worker and
    round (k, or 0 when the residual was exactly zero and the round's message
    is empty).
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def msc_topk(X: np.ndarray, V: np.ndarray, k: int, R: int) -> np.ndarray:
    """R rounds of top-k accumulation: V[sel] += (X-V)[sel], ties -> lowest index."""
    n, d = X.shape
    counts = np.zeros((n, R), dtype=np.int64)
    rows = np.arange(n)[:, None]
    for r in range(R):
        res = X - V
        # stable argsort on -|res|: equal magnitudes keep the lowest index
        order = np.argsort(-np.abs(res), axis=1, kind="stable")
        sel = np.sort(order[:, :k], axis=1)
        nonzero = np.any(res != 0.0, axis=1)
        V[rows, sel] += res[rows, sel]
        counts[:, r] = np.where(nonzero, k, 0)
    return counts


def msc_randk(X: np.ndarray, V: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """R rounds of unscaled random-k accumulation: V[idx_r] += (X-V)[idx_r].

    idx (n, R, k): pre-drawn coordinate selections, ascending within each row.
    """
    n, d = X.shape
    R = idx.shape[1]
    counts = np.zeros((n, R), dtype=np.int64)
    rows = np.arange(n)[:, None]
    for r in range(R):
        res = X - V
        sel = idx[:, r, :]
        nonzero = np.any(res != 0.0, axis=1)
        V[rows, sel] += res[rows, sel]
        counts[:, r] = np.where(nonzero, sel.shape[1], 0)
    return counts


def msc_urandk(X: np.ndarray, V: np.ndarray, idx: np.ndarray, gain: float, accum_scale: float) -> np.ndarray:
    """R rounds of scaled random-k accumulation.

    Message value is gain * residual[j] (gain = d/k); the accumulator adds
    accum_scale * message exactly as the receiver does (1/(1+omega) on the
    unbiased branch, the wrapper scale on the contractive branch), keeping
    sender and receiver bitwise identical.
    """
    n, d = X.shape
    R = idx.shape[1]
    counts = np.zeros((n, R), dtype=np.int64)
    rows = np.arange(n)[:, None]
    for r in range(R):
        res = X - V
        sel = idx[:, r, :]
        nonzero = np.any(res != 0.0, axis=1)
        msg = gain * res[rows, sel]
        V[rows, sel] += accum_scale * msg
        counts[:, r] = np.where(nonzero, sel.shape[1], 0)
    return counts


def pairwise_sum(G: np.ndarray) -> np.ndarray:
    """Fixed-order pairwise tree sum over rows: (0,1),(2,3),... per level.

    Every reduction across workers in the library goes through this function
    so that results do not depend on worker scheduling.
    """
    M = np.array(G, dtype=np.float64)
    while M.shape[0] > 1:
        m = M.shape[0]
        even = M[0 : m - (m % 2) : 2]
        odd = M[1 : m : 2]
        paired = even + odd
        if m % 2:
            M = np.concatenate([paired, M[m - 1 :]], axis=0)
        else:
            M = paired
    return M[0]
