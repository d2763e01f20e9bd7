"""Compressed-SGD baselines sharing one round shape: every worker sends one
compressed message per round and the server reduces the decoded rows in fixed
ascending pairwise order, so all methods consume identical budgets."""

from __future__ import annotations

import math

import numpy as np

from .._kernels import pairwise_sum
from ..compressors import (
    CompressorSpec,
    _pair_count,
    compress,
    compress_batched,
    decompress,
    message_costs,
)
from ..core import StreamContext
from ..problems import OracleConfig, ProblemInstance, oracle_round_average
from .common import (
    CommLedger,
    Trajectory,
    as_schedule,
    finalize_metrics,
    measure_metrics,
    normalize_specs,
)

__all__ = ["BASELINES", "gradient_descent_reference", "run_baseline"]

BASELINES = ("QSGD", "MEM_SGD", "DOUBLE_SQUEEZE", "EF21_SGD")


def _compress_all(X, specs, streams):
    """Compress row i with spec i; returns decoded rows and pair counts."""
    first = specs[0]
    if all(s == first for s in specs[1:]):
        return compress_batched(X, first, streams)
    n, d = X.shape
    C = np.empty_like(X)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        msg = compress(specs[i], X[i], streams[i])
        C[i] = decompress(msg, d)
        counts[i] = _pair_count(msg)
    return C, counts


def _round_update(name, G, M, eta, specs, streams):
    """One worker-side exchange; returns (rows, coeff, counts, M_next).

    rows are the decoded per-worker vectors the server reduces after scaling
    by coeff; M_next is the per-worker memory entering the next round.
    """
    if name == "QSGD":
        rows, counts = _compress_all(G, specs, streams)
        return rows, eta, counts, M
    if name == "MEM_SGD":
        P = M + eta * G
        rows, counts = _compress_all(P, specs, streams)
        return rows, 1.0, counts, P - rows
    if name == "DOUBLE_SQUEEZE":
        P = G + M
        rows, counts = _compress_all(P, specs, streams)
        return rows, eta, counts, P - rows
    # EF21_SGD: tracker moved by the compressed residual; computed as
    # g - ((g - v) - decoded), algebraically v + decoded, so a lossless
    # compressor makes the tracker exactly g.
    residual = G - M
    delta, counts = _compress_all(residual, specs, streams)
    M_next = G - (residual - delta)
    return M_next, eta, counts, M_next


def _charge_round(ledger, specs, d, counts):
    first = specs[0]
    if all(s == first for s in specs[1:]):
        scalar, bits = message_costs(first, d, counts)
    else:
        scalar = bits = 0
        for i, spec in enumerate(specs):
            s, b = message_costs(spec, d, counts[i : i + 1])
            scalar += s
            bits += b
    ledger.charge_all(messages=1, queries=1, scalar=scalar, bits=bits)


def run_baseline(
    name: str,
    problem: ProblemInstance,
    oracle_cfg: OracleConfig,
    specs,
    lr,
    T: int,
    rng: StreamContext,
    *,
    metrics: tuple = ("f_gap",),
    ledger: CommLedger | None = None,
    x0=None,
    on_round=None,
) -> Trajectory:
    """T rounds of the named method; one message and one query per worker
    per round.

    QSGD sends compressed gradients; MEM-SGD and Double-Squeeze compensate
    compression error through a worker-side residual (the latter around the
    raw gradient, with the server broadcast left uncompressed); EF21 keeps a
    per-worker tracker moved by compressed increments. The tracker update is
    computed as g - ((g - v) - decoded), algebraically v + decoded, so a
    lossless compressor reproduces plain SGD bitwise.
    """
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINES}")
    if not metrics:
        raise ValueError("at least one metric must be recorded")
    if T < 0:
        raise ValueError("T must be non-negative")
    specs = normalize_specs(specs, problem.n)
    n, d = problem.n, problem.d
    if ledger is None:
        ledger = CommLedger.for_workers(n)
    sched = as_schedule(lr)

    x = np.zeros(d) if x0 is None else np.array(x0, dtype=np.float64).reshape(-1)
    M = np.zeros((n, d))  # error residual (MEM/Double-Squeeze) or EF21 tracker
    oracle_streams = [rng.worker(i, "oracle") for i in range(n)]
    private = [
        rng.worker(i, "compress") if specs[i].randomness == "Private" else None
        for i in range(n)
    ]

    per_iter = {m: [v] for m, v in measure_metrics(problem, x, metrics).items()}
    diverged = False
    divergence_round = None
    for t in range(T):
        eta = sched(t)
        G = oracle_round_average(problem, x, oracle_cfg, 1, oracle_streams)
        streams = [
            rng.shared(t, "shared-sparsifier") if specs[i].randomness == "SharedPerRound" else private[i]
            for i in range(n)
        ]

        rows, coeff, counts, M = _round_update(name, G, M, eta, specs, streams)
        x = x - pairwise_sum(coeff * rows) / n
        _charge_round(ledger, specs, d, counts)
        bad = not np.all(np.isfinite(x))
        row = measure_metrics(problem, x, metrics)
        for m, v in row.items():
            per_iter[m].append(float("inf") if bad else v)
        if bad or not all(math.isfinite(v) for v in row.values()):
            diverged = True
            divergence_round = t + 1
            break
        if on_round is not None:
            on_round(t + 1, x)

    return Trajectory(
        algorithm=name,
        metrics=finalize_metrics(per_iter, 1),
        x_final=x,
        ledger=ledger,
        diverged=diverged,
        divergence_round=divergence_round,
    )


def gradient_descent_reference(problem: ProblemInstance, lr, T: int, x0=None) -> np.ndarray:
    """Plain full-gradient loop with the same fixed reduction order the
    compressed methods use; lossless-compressor runs must match it bitwise.
    Returns the (T+1, d) iterate matrix."""
    sched = as_schedule(lr)
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=np.float64).reshape(-1)
    xs = np.empty((T + 1, problem.d))
    xs[0] = x
    for t in range(T):
        G = problem.worker_grads(x)
        x = x - pairwise_sum(sched(t) * G) / problem.n
        xs[t + 1] = x
    return xs
