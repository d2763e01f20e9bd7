"""Accelerated compressed optimizer: a Nesterov outer loop in which every
worker refines its message with R-sample gradient accumulation and multi-step
compression, plus the restarted multi-stage variant."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._kernels import pairwise_sum
from ..compressors import CompressorSpec, _pair_count, message_costs
from ..core import RandomStream, StreamContext
from ..msc import msc_batched, msc_send
from ..problems import OracleConfig, ProblemInstance, oracle_round_average
from .common import (
    AlgoState,
    CommLedger,
    DivergenceError,
    NeolithicHyper,
    StagePlan,
    Trajectory,
    finalize_metrics,
    measure_metrics,
    normalize_specs,
)

__all__ = ["RunStreams", "neolithic_round", "run_neolithic", "run_multistage"]


@dataclass
class RunStreams:
    """Per-run randomness bundle.

    Worker oracle and private-compressor streams are derived once and their
    positions advance across iterations; shared-randomness compressors instead
    re-derive one stream per outer iteration from ctx so that every worker
    reproduces the identical mask sequence.
    """

    ctx: StreamContext
    oracle: list[RandomStream]
    compress: list[RandomStream | None]

    @classmethod
    def create(cls, ctx: StreamContext, n: int, specs: list[CompressorSpec]) -> "RunStreams":
        oracle = [ctx.worker(i, "oracle") for i in range(n)]
        compress = [
            ctx.worker(i, "compress") if specs[i].randomness == "Private" else None
            for i in range(n)
        ]
        return cls(ctx=ctx, oracle=oracle, compress=compress)

    def round_streams(self, specs: list[CompressorSpec], k: int) -> list[RandomStream | None]:
        streams: list[RandomStream | None] = []
        for i, spec in enumerate(specs):
            if spec.randomness == "SharedPerRound":
                streams.append(self.ctx.shared(k, "shared-sparsifier"))
            else:
                streams.append(self.compress[i])
        return streams


def _msc_exchange(G, specs, R, streams):
    """Per-worker MSC over the gradient matrix; batched when specs agree."""
    first = specs[0]
    if all(s == first for s in specs[1:]):
        return msc_batched(G, first, R, streams)
    out = np.empty_like(G)
    counts = np.zeros((G.shape[0], R), dtype=np.int64)
    for i in range(G.shape[0]):
        transcript, v = msc_send(G[i], specs[i], R, streams[i])
        out[i] = v
        counts[i] = [_pair_count(m) for m in transcript.messages]
    return out, counts


def _charge(ledger, specs, d, counts, R):
    first = specs[0]
    if all(s == first for s in specs[1:]):
        scalar, bits = message_costs(first, d, counts)
    else:
        scalar = bits = 0
        for i, spec in enumerate(specs):
            s, b = message_costs(spec, d, counts[i])
            scalar += s
            bits += b
    ledger.charge_all(messages=R, queries=R, scalar=scalar, bits=bits)


def neolithic_round(
    state: AlgoState,
    problem: ProblemInstance,
    oracle_cfg: OracleConfig,
    specs,
    hyper: NeolithicHyper,
    k: int,
    rng: RunStreams,
    ledger: CommLedger | None = None,
) -> AlgoState:
    """One outer iteration.

    Query point y = (1-gamma_k/p)x + (gamma_k/p)z; each worker averages R
    oracle samples at y and transmits the average through R rounds of
    multi-step compression; the server reduces the n decoded vectors in fixed
    ascending pairwise order and takes the accelerated x/z updates. Charges R
    messages and R queries per worker when a ledger is given.
    """
    x, z = state.x, state.z
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise DivergenceError(f"non-finite iterate entering iteration {k}", k)
    specs = normalize_specs(specs, problem.n)
    p = hyper.p
    gamma = hyper.gamma_at(k)
    eta = hyper.eta_at(k)
    R = hyper.R

    # gamma == p makes the x coefficient exactly zero; copying z keeps the
    # lossless reductions bitwise instead of adding a 0*x term.
    if gamma == p:
        y = z.copy()
    else:
        c = gamma / p
        y = (1.0 - c) * x + c * z

    G = oracle_round_average(problem, y, oracle_cfg, R, rng.oracle)
    V, counts = _msc_exchange(G, specs, R, rng.round_streams(specs, k))

    step = pairwise_sum((eta / p) * V) / problem.n
    x_next = y - step

    if ledger is not None:
        _charge(ledger, specs, problem.d, counts, R)
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(f"non-finite iterate produced by iteration {k}", k)

    if gamma == 1.0 and p == 1.0:
        # z-update coefficients are exactly (1, 0, 0); copying keeps the
        # plain-SGD reduction bitwise.
        z_next = x_next.copy()
    else:
        z_next = (
            (1.0 / gamma) * x_next + (1.0 / p - 1.0 / gamma) * x + (1.0 - 1.0 / p) * z
        )
    return AlgoState(x=x_next, z=z_next, memories=state.memories, k=k + 1)


def run_neolithic(
    problem: ProblemInstance,
    oracle_cfg: OracleConfig,
    specs,
    hyper: NeolithicHyper,
    ctx: StreamContext,
    *,
    mode: str = "convex",
    metrics: tuple = ("f_gap",),
    ledger: CommLedger | None = None,
    x0=None,
    name: str = "NEOLITHIC",
    on_round=None,
) -> Trajectory:
    """K outer iterations from x0 (default: the origin).

    mode "convex" returns the last iterate; "nonconvex" returns an iterate
    drawn uniformly from {x^(0..K)}. The recorded metric arrays carry one
    entry per communication round, holding each iteration's value over its R
    rounds. Divergence truncates the run and flags the trajectory.
    """
    if mode not in ("convex", "nonconvex"):
        raise ValueError(f"unknown mode {mode!r}")
    if not metrics:
        raise ValueError("at least one metric must be recorded")
    specs = normalize_specs(specs, problem.n)
    if ledger is None:
        ledger = CommLedger.for_workers(problem.n)
    state = AlgoState.initial(np.zeros(problem.d) if x0 is None else x0)
    rng = RunStreams.create(ctx, problem.n, specs)

    iterates = [state.x.copy()] if mode == "nonconvex" else None
    per_iter = {m: [v] for m, v in measure_metrics(problem, state.x, metrics).items()}
    diverged = False
    divergence_round = None
    for k in range(hyper.K):
        try:
            state = neolithic_round(state, problem, oracle_cfg, specs, hyper, k, rng, ledger)
        except DivergenceError:
            diverged = True
            divergence_round = (k + 1) * hyper.R
            for m in per_iter:
                per_iter[m].append(float("inf"))
            break
        row = measure_metrics(problem, state.x, metrics)
        for m, v in row.items():
            per_iter[m].append(v)
        if not all(math.isfinite(v) for v in row.values()):
            # The iterate is still finite but the objective overflowed;
            # the +inf sample just recorded is the sentinel.
            diverged = True
            divergence_round = (k + 1) * hyper.R
            break
        if iterates is not None:
            iterates.append(state.x.copy())
        if on_round is not None:
            on_round(k + 1, state.x)

    x_final = state.x
    if mode == "nonconvex" and not diverged:
        u = float(ctx.shared(0, "shared-output-sample").uniform())
        x_final = iterates[min(int(u * len(iterates)), len(iterates) - 1)]
    return Trajectory(
        algorithm=name,
        metrics=finalize_metrics(per_iter, hyper.R),
        x_final=x_final,
        ledger=ledger,
        diverged=diverged,
        divergence_round=divergence_round,
    )


def run_multistage(
    problem: ProblemInstance,
    oracle_cfg: OracleConfig,
    specs,
    plan: StagePlan,
    ctx: StreamContext,
    *,
    target: float | None = None,
    stop_at_target: bool = True,
    metrics: tuple = ("f_gap",),
    x0=None,
    name: str = "NEOLITHIC-MS",
) -> Trajectory:
    """Restarted runs: stage s starts from the previous stage's output.

    Stages share one ledger; each stage draws from its own child stream
    scope. When target is set and stop_at_target holds, the run stops at the
    first stage whose measured gap reaches it; if the plan runs out first the
    best-seen iterate is returned and info["reached_target"] stays False.
    """
    if not metrics:
        raise ValueError("at least one metric must be recorded")
    specs = normalize_specs(specs, problem.n)
    ledger = CommLedger.for_workers(problem.n)
    x_cur = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=np.float64)

    joined = {m: [v] for m, v in measure_metrics(problem, x_cur, metrics).items()}
    best_x, best_gap = x_cur.copy(), problem.gap(x_cur)
    stage_gaps = []
    reached = None if target is None else False
    diverged = False
    divergence_round = None
    stages_run = 0

    for s in range(plan.S):
        traj = run_neolithic(
            problem,
            oracle_cfg,
            specs,
            plan.hyper(s),
            ctx.child(f"stage{s}"),
            mode="convex",
            metrics=metrics,
            ledger=ledger,
            x0=x_cur,
            name=name,
        )
        stages_run = s + 1
        offset = len(joined[metrics[0]]) - 1
        for m in joined:
            joined[m].extend(traj.metrics[m][1:].tolist())
        if traj.diverged:
            diverged = True
            divergence_round = offset + traj.divergence_round
            break
        x_cur = traj.x_final
        gap = problem.gap(x_cur)
        stage_gaps.append(gap)
        if gap < best_gap:
            best_x, best_gap = x_cur.copy(), gap
        if target is not None and gap <= target:
            reached = True
            if stop_at_target:
                break

    x_final = x_cur if (target is None or reached) and not diverged else best_x
    metrics_out = {m: np.asarray(v, dtype=np.float64) for m, v in joined.items()}
    return Trajectory(
        algorithm=name,
        metrics=metrics_out,
        x_final=x_final,
        ledger=ledger,
        diverged=diverged,
        divergence_round=divergence_round,
        info={
            "reached_target": reached,
            "stages_run": stages_run,
            "stage_final_gaps": stage_gaps,
            "returned_best": bool(x_final is best_x),
        },
    )
