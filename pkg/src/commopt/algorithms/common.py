"""Shared types for the optimizer runs.

Hyperparameters, run state, per-run communication ledger, and the trajectory
record every run function returns. Kept separate from the run loops so the
harness can consume the types without importing any particular algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..compressors import CompressorSpec

__all__ = [
    "AlgoState",
    "CommLedger",
    "DivergenceError",
    "NeolithicHyper",
    "StagePlan",
    "Trajectory",
    "as_schedule",
    "expand_iterates",
    "finalize_metrics",
    "measure_metrics",
    "normalize_specs",
]

METRIC_NAMES = ("f_gap", "grad_norm_sq")


class DivergenceError(RuntimeError):
    """An iterate stopped being finite; carries the outer iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


def as_schedule(value) -> Callable[[int], float]:
    """Normalize a constant or callable step schedule to a callable of t."""
    if callable(value):
        return value
    v = float(value)
    return lambda t: v


@dataclass(frozen=True)
class NeolithicHyper:
    """Hyperparameters of one accelerated run.

    eta and gamma may be constants or callables of the iteration index; every
    gamma_k must satisfy 0 < gamma_k <= p so the query-point combination stays
    convex.
    """

    eta: float | Callable[[int], float]
    p: float
    gamma: float | Callable[[int], float]
    R: int
    K: int

    def __post_init__(self):
        if not self.p > 0.0:
            raise ValueError("p must be positive")
        if int(self.R) != self.R or self.R < 1:
            raise ValueError("R must be a positive integer")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("K must be a non-negative integer")
        object.__setattr__(self, "R", int(self.R))
        object.__setattr__(self, "K", int(self.K))
        if not callable(self.gamma):
            self.gamma_at(0)
        if not callable(self.eta):
            self.eta_at(0)

    def eta_at(self, k: int) -> float:
        eta = float(self.eta(k)) if callable(self.eta) else float(self.eta)
        if not (np.isfinite(eta) and eta > 0.0):
            raise ValueError(f"eta at iteration {k} must be positive, got {eta}")
        return eta

    def gamma_at(self, k: int) -> float:
        g = float(self.gamma(k)) if callable(self.gamma) else float(self.gamma)
        if not 0.0 < g <= self.p:
            raise ValueError(f"gamma at iteration {k} must be in (0, p={self.p}], got {g}")
        return g


@dataclass(frozen=True)
class StagePlan:
    """Per-stage hyperparameters for restarted runs; index s = stage."""

    K: tuple[int, ...]
    R: tuple[int, ...]
    eta: tuple[float, ...]
    p: tuple[float, ...]
    gamma: tuple[float, ...]

    def __post_init__(self):
        lists = (self.K, self.R, self.eta, self.p, self.gamma)
        for name, values in zip(("K", "R", "eta", "p", "gamma"), lists):
            object.__setattr__(self, name, tuple(values))
        if not self.K:
            raise ValueError("a plan needs at least one stage")
        if any(len(v) != len(self.K) for v in (self.R, self.eta, self.p, self.gamma)):
            raise ValueError("per-stage lists must share one length")

    @property
    def S(self) -> int:
        return len(self.K)

    def hyper(self, s: int) -> NeolithicHyper:
        return NeolithicHyper(
            eta=self.eta[s], p=self.p[s], gamma=self.gamma[s], R=self.R[s], K=self.K[s]
        )

    def total_rounds(self) -> int:
        """Communication rounds per worker if every stage runs to completion."""
        return int(sum(k * r for k, r in zip(self.K, self.R)))


@dataclass
class AlgoState:
    """Server iterates plus optional per-worker memories."""

    x: np.ndarray
    z: np.ndarray
    memories: np.ndarray | None = None  # (n, d); error residuals or trackers
    k: int = 0

    @classmethod
    def initial(cls, x0, n: int | None = None, with_memory: bool = False) -> "AlgoState":
        x = np.array(x0, dtype=np.float64, copy=True).reshape(-1)
        mem = np.zeros((n, x.size)) if with_memory else None
        return cls(x=x, z=x.copy(), memories=mem, k=0)


@dataclass
class CommLedger:
    """Per-worker communication and oracle tally for one run."""

    messages: np.ndarray  # (n,) compressed messages sent, per worker
    queries: np.ndarray  # (n,) oracle queries, per worker
    scalar_cost: int = 0
    bit_cost: int = 0

    @classmethod
    def for_workers(cls, n: int) -> "CommLedger":
        return cls(messages=np.zeros(n, dtype=np.int64), queries=np.zeros(n, dtype=np.int64))

    def charge_all(self, messages: int = 0, queries: int = 0, scalar: int = 0, bits: int = 0):
        """Charge every worker the same message/query count; totals are global."""
        if min(messages, queries, scalar, bits) < 0:
            raise ValueError("ledger counts are monotone; negative charge rejected")
        self.messages += messages
        self.queries += queries
        self.scalar_cost += int(scalar)
        self.bit_cost += int(bits)


@dataclass
class Trajectory:
    """Per-communication-round record of one run.

    Each metric array has one entry per communication round, index 0 holding
    the value at the start point; an outer iteration with R compressed rounds
    holds its value over all R of them. A diverged run is truncated after the
    failing iteration, whose slot records +inf.
    """

    algorithm: str
    metrics: dict[str, np.ndarray]
    x_final: np.ndarray
    ledger: CommLedger
    diverged: bool = False
    divergence_round: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(next(iter(self.metrics.values()))) - 1


def expand_iterates(per_iter, R: int) -> np.ndarray:
    """Per-outer-iteration values -> per-communication-round values.

    Iteration k's value is held constant over its R rounds; entry j of the
    result is the value in effect after j compressed communication rounds.
    """
    per_iter = np.asarray(per_iter, dtype=np.float64)
    last = per_iter.size - 1
    return np.append(np.repeat(per_iter[:last], R), per_iter[last])


def finalize_metrics(per_iter: dict[str, list], R: int) -> dict[str, np.ndarray]:
    """Expand recorded per-iteration metric lists to per-round arrays."""
    return {name: expand_iterates(vals, R) for name, vals in per_iter.items()}


def measure_metrics(problem, x, names) -> dict[str, float]:
    row = {}
    for name in names:
        if name == "f_gap":
            row[name] = float(problem.gap(x))
        elif name == "grad_norm_sq":
            g = problem.grad(x)
            row[name] = float(g @ g)
        else:
            raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
    return row


def normalize_specs(specs, n: int) -> list[CompressorSpec]:
    """Accept one spec for all workers or an explicit per-worker list."""
    if isinstance(specs, CompressorSpec):
        return [specs] * n
    specs = list(specs)
    if len(specs) != n:
        raise ValueError(f"expected {n} per-worker compressor specs, got {len(specs)}")
    return specs
