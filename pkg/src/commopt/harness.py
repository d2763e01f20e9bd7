"""Experiment orchestration: validated configs, multi-trial runs, CSV logs.

A config is a plain mapping (the CLI reads it from a YAML file) with
top-level keys::

    problem:     {generator, params, seed}
    oracle:      {sigma}
    budget_T:    compressed communication rounds per worker
    trials:      independent repetitions
    master_seed: root of every random stream
    algorithms:  [{name, compressor{...}, hyper{...}, label?, mode?}, ...]
    output:      CSV path
    metrics:     optional, subset of {f_gap, grad_norm_sq}
    id:          optional experiment id (defaults to the output file stem)

Each (algorithm, trial) pair is an independent cell: trial t reseeds every
stream through (master_seed, t) and the stream scope embeds the algorithm
label, so no cell can observe another's randomness. Cells may run in worker
processes; rows are merged in deterministic key order, so the emitted CSV is
byte-identical regardless of execution order or job count.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .algorithms import (
    BASELINES,
    HarmonicGamma,
    PowerGamma,
    NeolithicHyper,
    make_lr,
    run_baseline,
    run_neolithic,
)
from .compressors import (
    IDENTITY,
    RANDK,
    RANDOM_QUANT,
    SCALED,
    SHARED_SPARSIFIER,
    TOPK,
    URANDK,
    CompressorSpec,
    identity,
    rand_k,
    random_quant,
    scale_to_contractive,
    shared_sparsifier,
    top_k,
    urand_k,
)
from .core import StreamContext
from .problems import GENERATORS, OracleConfig, ProblemInstance, generate

__all__ = [
    "CSV_HEADER",
    "DB_FLOOR",
    "METRIC_NAMES",
    "AggregateSeries",
    "AlgoEntry",
    "ConfigError",
    "ExperimentConfig",
    "MetricsLog",
    "MetricsRecord",
    "aggregate",
    "build_compressor",
    "build_problem",
    "compressor_slug",
    "load_csv",
    "run_experiment",
    "sweep_R",
    "to_db",
    "validate_config",
    "write_manifest",
]

CSV_HEADER = "algorithm,trial,comm_round,metric,value"
DB_FLOOR = -160.0
METRIC_NAMES = ("f_gap", "grad_norm_sq")

_log = logging.getLogger("commopt.harness")


class ConfigError(ValueError):
    """A config failed validation."""


# -- config schema -------------------------------------------------------------


def _require_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(block: dict, required: set, optional: set, where: str):
    unknown = sorted(set(block) - required - optional)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")
    missing = sorted(required - set(block))
    if missing:
        raise ConfigError(f"missing keys in {where}: {', '.join(missing)}")


def _int_field(block: dict, key: str, where: str, minimum: int) -> int:
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    if value < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}, got {value}")
    return value


def _num_field(block: dict, key: str, where: str, minimum: float | None = None) -> float:
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    value = float(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}, got {value}")
    return value


def _bool_field(block: dict, key: str, where: str, default: bool) -> bool:
    value = block.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be a boolean")
    return value


_SPARSE_BUILDERS = {TOPK: top_k, RANDK: rand_k, URANDK: urand_k}


def build_compressor(block: dict) -> CompressorSpec:
    """CompressorSpec from a config block {kind, k|s|omega, scaled?, to_contractive?}.

    to_contractive wraps an unbiased compressor in the 1/(1+omega) scaling so
    it enters the contractive class.
    """
    _require_mapping(block, "compressor")
    kind = block.get("kind")
    where = "compressor"
    if kind in _SPARSE_BUILDERS:
        _check_keys(block, {"kind", "k"}, {"to_contractive"}, where)
        spec = _SPARSE_BUILDERS[kind](_int_field(block, "k", where, 1))
    elif kind == RANDOM_QUANT:
        _check_keys(block, {"kind", "s"}, {"to_contractive"}, where)
        spec = random_quant(_int_field(block, "s", where, 1))
    elif kind == IDENTITY:
        _check_keys(block, {"kind"}, set(), where)
        spec = identity()
    elif kind == SHARED_SPARSIFIER:
        _check_keys(block, {"kind", "omega"}, {"scaled", "to_contractive"}, where)
        omega = _num_field(block, "omega", where, 0.0)
        spec = shared_sparsifier(omega, scaled=_bool_field(block, "scaled", where, True))
    else:
        known = sorted((*_SPARSE_BUILDERS, RANDOM_QUANT, IDENTITY, SHARED_SPARSIFIER))
        raise ConfigError(f"unknown compressor kind {kind!r}; expected one of {known}")
    if _bool_field(block, "to_contractive", where, False):
        try:
            spec = scale_to_contractive(spec)
        except ValueError as exc:
            raise ConfigError(f"compressor.to_contractive: {exc}") from None
    return spec


def compressor_slug(spec: CompressorSpec) -> str:
    """Short comma-free tag for cell labels, e.g. top2 or c-urand2."""
    if spec.kind == TOPK:
        return f"top{spec.k}"
    if spec.kind == RANDK:
        return f"rand{spec.k}"
    if spec.kind == URANDK:
        return f"urand{spec.k}"
    if spec.kind == RANDOM_QUANT:
        return f"quant{spec.s}"
    if spec.kind == IDENTITY:
        return "identity"
    if spec.kind == SHARED_SPARSIFIER:
        tag = f"shared{spec.omega:g}"
        return tag if spec.scaled else tag + "raw"
    if spec.kind == SCALED:
        return "c-" + compressor_slug(spec.inner)
    raise ValueError(f"unknown compressor kind {spec.kind!r}")


def _check_rate(block: dict, key: str, where: str):
    """A step/momentum size: a positive number or a named-schedule mapping."""
    value = block[key]
    if isinstance(value, dict):
        if key in ("eta", "lr"):
            want = {"c1", "eta0", "c2"}
        elif "g0" in value:
            want = {"g0", "c2"}  # gamma as the tuned power law g0*(k+1)^-c2
        else:
            want = {"a", "b"}  # gamma as the harmonic rule a/(k+b)
        _check_keys(value, want, set(), f"{where}.{key}")
        for sub in want:
            _num_field(value, sub, f"{where}.{key}")
    else:
        _num_field(block, key, where)
        if float(value) <= 0:
            raise ConfigError(f"{where}.{key} must be positive, got {value}")


def _validate_hyper(name: str, block: dict, where: str, require_R: bool) -> dict:
    _require_mapping(block, where)
    if name == "NEOLITHIC":
        required = {"eta", "R"} if require_R else {"eta"}
        _check_keys(block, required, {"R", "eta", "p", "gamma"}, where)
        if "R" in block:
            _int_field(block, "R", where, 1)
        _check_rate(block, "eta", where)
        if "p" in block:
            _num_field(block, "p", where, 1.0)
        if "gamma" in block:
            _check_rate(block, "gamma", where)
    else:
        _check_keys(block, {"lr"}, set(), where)
        _check_rate(block, "lr", where)
    return dict(block)


@dataclass(frozen=True)
class AlgoEntry:
    """One validated algorithm slot.

    hyper stays a plain mapping until a problem exists; step sizes given as
    {c1, eta0, c2} need the problem's smoothness constant to resolve.
    """

    name: str
    label: str
    spec: CompressorSpec
    hyper: dict
    mode: str = "convex"


def _validate_entry(block: dict, index: int, require_R: bool) -> AlgoEntry:
    where = f"algorithms[{index}]"
    _require_mapping(block, where)
    _check_keys(block, {"name", "compressor", "hyper"}, {"label", "mode"}, where)
    name = block["name"]
    valid_names = ("NEOLITHIC", *BASELINES)
    if name not in valid_names:
        raise ConfigError(f"{where}.name must be one of {valid_names}, got {name!r}")
    mode = block.get("mode", "convex")
    if "mode" in block and name != "NEOLITHIC":
        raise ConfigError(f"{where}.mode applies to NEOLITHIC only")
    if mode not in ("convex", "nonconvex"):
        raise ConfigError(f"{where}.mode must be convex or nonconvex, got {mode!r}")
    label = block.get("label", name)
    if not isinstance(label, str) or not label:
        raise ConfigError(f"{where}.label must be a non-empty string")
    if "," in label or "\n" in label:
        raise ConfigError(f"{where}.label cannot contain commas or newlines: {label!r}")
    try:
        spec = build_compressor(block["compressor"])
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    hyper = _validate_hyper(name, block["hyper"], f"{where}.hyper", require_R)
    return AlgoEntry(name=name, label=label, spec=spec, hyper=hyper, mode=mode)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description, independent of any built problem."""

    generator: str
    params: tuple
    problem_seed: int
    sigma: float
    budget_T: int
    trials: int
    master_seed: int
    entries: tuple
    output: str
    metrics: tuple = ("f_gap",)
    exp_id: str = ""

    def params_dict(self) -> dict:
        return dict(self.params)


_TOP_REQUIRED = {"problem", "oracle", "budget_T", "trials", "master_seed", "algorithms", "output"}


def validate_config(raw: dict, *, require_R: bool = True) -> ExperimentConfig:
    """Check the whole mapping, rejecting unknown keys at every level.

    require_R=False lets NEOLITHIC entries omit hyper.R, which sweep_R fills
    in per sweep point.
    """
    _require_mapping(raw, "config")
    _check_keys(raw, _TOP_REQUIRED, {"metrics", "id"}, "config")

    prob = _require_mapping(raw["problem"], "problem")
    _check_keys(prob, {"generator", "params", "seed"}, set(), "problem")
    generator = prob["generator"]
    if generator not in GENERATORS:
        raise ConfigError(
            f"unknown problem generator {generator!r}; expected one of {sorted(GENERATORS)}"
        )
    params = _require_mapping(prob["params"], "problem.params")
    for key, value in params.items():
        if not isinstance(key, str):
            raise ConfigError(f"problem.params keys must be strings, got {key!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"problem.params.{key} must be a scalar, got {value!r}")
    problem_seed = _int_field(prob, "seed", "problem", 0)

    oracle = _require_mapping(raw["oracle"], "oracle")
    _check_keys(oracle, {"sigma"}, set(), "oracle")
    sigma = _num_field(oracle, "sigma", "oracle", 0.0)

    budget_T = _int_field(raw, "budget_T", "config", 0)
    trials = _int_field(raw, "trials", "config", 1)
    master_seed = _int_field(raw, "master_seed", "config", 0)

    output = raw["output"]
    if not isinstance(output, str) or not output:
        raise ConfigError("config.output must be a non-empty path")

    metrics = raw.get("metrics", list(METRIC_NAMES[:1]))
    if not isinstance(metrics, (list, tuple)) or not metrics:
        raise ConfigError("config.metrics must be a non-empty list")
    for m in metrics:
        if m not in METRIC_NAMES:
            raise ConfigError(f"unknown metric {m!r}; expected a subset of {METRIC_NAMES}")
    if len(set(metrics)) != len(metrics):
        raise ConfigError("config.metrics has duplicates")

    exp_id = raw.get("id", os.path.splitext(os.path.basename(output))[0])
    if not isinstance(exp_id, str) or not exp_id:
        raise ConfigError("config.id must be a non-empty string")

    entries_raw = raw["algorithms"]
    if not isinstance(entries_raw, (list, tuple)) or not entries_raw:
        raise ConfigError("config.algorithms must be a non-empty list")
    entries = tuple(_validate_entry(b, i, require_R) for i, b in enumerate(entries_raw))
    labels = [e.label for e in entries]
    dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
    if dupes:
        raise ConfigError(f"duplicate algorithm labels {dupes}; set distinct 'label' fields")

    return ExperimentConfig(
        generator=generator,
        params=tuple(sorted(params.items())),
        problem_seed=problem_seed,
        sigma=sigma,
        budget_T=budget_T,
        trials=trials,
        master_seed=master_seed,
        entries=entries,
        output=output,
        metrics=tuple(metrics),
        exp_id=exp_id,
    )


def build_problem(cfg: ExperimentConfig) -> ProblemInstance:
    return generate(cfg.generator, cfg.params_dict(), cfg.problem_seed)


# -- metrics log ---------------------------------------------------------------


class MetricsRecord(NamedTuple):
    algorithm: str
    trial: int
    comm_round: int
    metric: str
    value: float


@dataclass
class MetricsLog:
    """Ordered metric rows; the CSV text is the canonical serialization."""

    rows: list

    def algorithms(self) -> list:
        return sorted({r.algorithm for r in self.rows})

    def diverged_cells(self) -> list:
        """(algorithm, trial) pairs whose run hit the +inf sentinel."""
        return sorted({(r.algorithm, r.trial) for r in self.rows if not math.isfinite(r.value)})

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r.algorithm},{r.trial},{r.comm_round},{r.metric},{r.value:.17g}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv(cls, path: str) -> "MetricsLog":
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {lines[0] if lines else ''!r}")
        rows = []
        for ln, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}:{ln}: expected 5 fields, got {len(parts)}")
            alg, trial, rnd, metric, value = parts
            rows.append(MetricsRecord(alg, int(trial), int(rnd), metric, float(value)))
        return cls(rows)


def load_csv(path: str) -> MetricsLog:
    return MetricsLog.from_csv(path)


def to_db(gap: float) -> float:
    """10*log10(gap) dB, floored at -160 (the floor absorbs gap <= 1e-16)."""
    if gap <= 1e-16:
        return DB_FLOOR
    return 10.0 * math.log10(gap)


# -- execution -----------------------------------------------------------------


@dataclass(frozen=True)
class _Cell:
    """One (algorithm, trial) unit of work; everything pickles."""

    label: str
    name: str
    trial: int
    problem: ProblemInstance
    sigma: float
    spec: CompressorSpec
    metrics: tuple
    master_seed: int
    budget_T: int
    hyper: NeolithicHyper | None = None
    lr: object = None
    mode: str = "convex"


def _resolve_rate(value, L: float):
    if isinstance(value, dict):
        return make_lr(value["c1"], L, value["eta0"], value["c2"])
    return float(value)


def _resolve_gamma(value):
    if isinstance(value, dict):
        if "g0" in value:
            return PowerGamma(value["g0"], value["c2"])
        return HarmonicGamma(value["a"], value["b"])
    return float(value)


def _prepare_entry(
    cfg: ExperimentConfig, problem: ProblemInstance, entry: AlgoEntry, *, exact_budget: bool
) -> list:
    """Cells for one entry, one per trial. exact_budget demands R | budget_T."""
    try:
        entry.spec.validate_for_dim(problem.d)
    except ValueError as exc:
        raise ConfigError(f"algorithm {entry.label!r}: {exc}") from None
    common = dict(
        label=entry.label,
        name=entry.name,
        problem=problem,
        sigma=cfg.sigma,
        spec=entry.spec,
        metrics=cfg.metrics,
        master_seed=cfg.master_seed,
        budget_T=cfg.budget_T,
        mode=entry.mode,
    )
    if entry.name == "NEOLITHIC":
        R = entry.hyper.get("R")
        if R is None:
            raise ConfigError(f"algorithm {entry.label!r}: hyper.R is required")
        if exact_budget and cfg.budget_T % R:
            raise ConfigError(
                f"algorithm {entry.label!r}: budget_T={cfg.budget_T} is not a multiple of R={R}"
            )
        try:
            hyper = NeolithicHyper(
                eta=_resolve_rate(entry.hyper["eta"], problem.L),
                p=float(entry.hyper.get("p", 1.0)),
                gamma=_resolve_gamma(entry.hyper.get("gamma", 1.0)),
                R=R,
                K=cfg.budget_T // R,
            )
        except ValueError as exc:
            raise ConfigError(f"algorithm {entry.label!r}: {exc}") from None
        common["hyper"] = hyper
    else:
        common["lr"] = _resolve_rate(entry.hyper["lr"], problem.L)
    return [_Cell(trial=t, **common) for t in range(cfg.trials)]


def _check_ledger(cell: _Cell, traj):
    expected = cell.hyper.K * cell.hyper.R if cell.name == "NEOLITHIC" else cell.budget_T
    if traj.diverged:
        expected = traj.divergence_round
    led = traj.ledger
    if not (np.all(led.messages == expected) and np.all(led.queries == expected)):
        raise RuntimeError(
            f"budget/ledger mismatch for {cell.label!r} trial {cell.trial}: expected "
            f"{expected} messages and queries per worker, ledger has "
            f"messages={led.messages.tolist()}, queries={led.queries.tolist()}"
        )


def _run_cell(cell: _Cell) -> list:
    ctx = StreamContext(cell.master_seed, cell.trial, cell.label)
    oracle = OracleConfig(sigma=cell.sigma)
    if cell.name == "NEOLITHIC":
        traj = run_neolithic(
            cell.problem,
            oracle,
            cell.spec,
            cell.hyper,
            ctx,
            mode=cell.mode,
            metrics=cell.metrics,
            name=cell.label,
        )
    else:
        traj = run_baseline(
            cell.name,
            cell.problem,
            oracle,
            cell.spec,
            cell.lr,
            cell.budget_T,
            ctx,
            metrics=cell.metrics,
        )
    _check_ledger(cell, traj)
    rows = []
    for m in cell.metrics:
        vals = traj.metrics[m]
        rows.extend(
            MetricsRecord(cell.label, cell.trial, r, m, float(vals[r])) for r in range(len(vals))
        )
    return rows


def _execute(cells: list, jobs: int | None) -> list:
    if jobs is None or jobs <= 1:
        results = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells, chunksize=1))
    rows = [rec for cell_rows in results for rec in cell_rows]
    rows.sort()
    return rows


def run_experiment(cfg, *, jobs: int | None = None, write: bool = True) -> MetricsLog:
    """All (algorithm, trial) cells of one experiment, merged into one log.

    cfg is a raw mapping or a validated ExperimentConfig. Every worker must
    consume exactly budget_T messages and queries; a mismatch aborts the run.
    Writes the CSV to cfg.output unless write is False.
    """
    if isinstance(cfg, dict):
        cfg = validate_config(cfg)
    problem = build_problem(cfg)
    cells = []
    for entry in cfg.entries:
        cells.extend(_prepare_entry(cfg, problem, entry, exact_budget=True))
    _log.info(
        "experiment %s: %d algorithms x %d trials, budget %d -> %s",
        cfg.exp_id,
        len(cfg.entries),
        cfg.trials,
        cfg.budget_T,
        cfg.output,
    )
    log = MetricsLog(_execute(cells, jobs))
    if write:
        log.write_csv(cfg.output)
    return log


def sweep_R(cfg, R_values, *, jobs: int | None = None, write: bool = True) -> MetricsLog:
    """Best f_gap within the budget for each compression-rounds count R.

    The config must hold exactly one NEOLITHIC entry whose hyper omits R;
    each R spawns one cell per trial, labeled with the R value, compressor,
    heterogeneity scale, and noise level it ran under. A trial's single row
    (at comm_round = budget_T) records the smallest gap observed within the
    budget, or the +inf sentinel if the trial diverged. R need not divide
    the budget; the last partial outer iteration is simply not run.
    """
    if isinstance(cfg, dict):
        cfg = validate_config(cfg, require_R=False)
    if len(cfg.entries) != 1 or cfg.entries[0].name != "NEOLITHIC":
        raise ConfigError("sweep_R requires exactly one NEOLITHIC algorithm entry")
    entry = cfg.entries[0]
    if "R" in entry.hyper:
        raise ConfigError("sweep_R supplies R; remove it from hyper")
    R_list = list(R_values)
    if not R_list:
        raise ConfigError("R_values must be non-empty")
    seen = set()
    for R in R_list:
        if isinstance(R, bool) or not isinstance(R, int) or R < 1:
            raise ConfigError(f"R values must be integers >= 1, got {R!r}")
        if R > cfg.budget_T:
            raise ConfigError(f"R={R} exceeds the budget of {cfg.budget_T} rounds")
        if R in seen:
            raise ConfigError(f"duplicate R value {R}")
        seen.add(R)

    cfg = replace(cfg, metrics=("f_gap",))
    problem = build_problem(cfg)
    het = cfg.params_dict().get("het_scale", 0.0)
    slug = compressor_slug(entry.spec)
    cells = []
    for R in R_list:
        label = f"{entry.label}_R{R}_{slug}_het{het:g}_sig{cfg.sigma:g}"
        swept = replace(entry, label=label, hyper={**entry.hyper, "R": R})
        cells.extend(_prepare_entry(cfg, problem, swept, exact_budget=False))
    _log.info(
        "sweep %s: R in %s, %d trials, budget %d -> %s",
        cfg.exp_id,
        R_list,
        cfg.trials,
        cfg.budget_T,
        cfg.output,
    )

    full = MetricsLog(_execute(cells, jobs))
    bad = set(full.diverged_cells())
    by_cell: dict = {}
    for rec in full.rows:
        by_cell.setdefault((rec.algorithm, rec.trial), []).append(rec.value)
    rows = []
    for (alg, trial), values in sorted(by_cell.items()):
        best = float("inf") if (alg, trial) in bad else min(values)
        rows.append(MetricsRecord(alg, trial, cfg.budget_T, "f_gap", best))
    rows.sort()
    log = MetricsLog(rows)
    if write:
        log.write_csv(cfg.output)
    return log


# -- aggregation ---------------------------------------------------------------


@dataclass(frozen=True)
class AggregateSeries:
    """Per-(algorithm, metric) statistic over non-diverged trials."""

    statistic: str
    series: dict  # (algorithm, metric) -> (rounds, values) arrays
    diverged: dict  # algorithm -> diverged trial count
    trials: dict  # algorithm -> total trials in the log


def aggregate(log: MetricsLog, statistic: str = "mean") -> AggregateSeries:
    """Reduce trials round-by-round; diverged trials are excluded and counted.

    All surviving trials of an (algorithm, metric) pair must have recorded
    the same rounds. The result is invariant to row order in the log.
    """
    if statistic not in ("mean", "median"):
        raise ValueError(f"unknown statistic {statistic!r}; expected mean or median")
    cells: dict = {}
    bad = set()
    for rec in log.rows:
        cell = cells.setdefault((rec.algorithm, rec.trial), {})
        cell.setdefault(rec.metric, {})[rec.comm_round] = rec.value
        if not math.isfinite(rec.value):
            bad.add((rec.algorithm, rec.trial))
    trials: dict = {}
    diverged: dict = {}
    for alg, _trial in cells:
        trials[alg] = trials.get(alg, 0) + 1
        diverged.setdefault(alg, 0)
    for alg, _trial in bad:
        diverged[alg] += 1

    grouped: dict = {}
    for (alg, trial), metrics in sorted(cells.items()):
        if (alg, trial) in bad:
            continue
        for metric, by_round in metrics.items():
            grouped.setdefault((alg, metric), []).append(by_round)
    series = {}
    for key, trail in sorted(grouped.items()):
        rounds = sorted(trail[0])
        for other in trail[1:]:
            if sorted(other) != rounds:
                raise ValueError(f"trials disagree on recorded rounds for {key}")
        matrix = np.array([[tr[r] for r in rounds] for tr in trail])
        values = matrix.mean(axis=0) if statistic == "mean" else np.median(matrix, axis=0)
        series[key] = (np.asarray(rounds, dtype=np.int64), values)
    return AggregateSeries(statistic=statistic, series=series, diverged=diverged, trials=trials)


# -- manifest ------------------------------------------------------------------


def write_manifest(records, path: str):
    """One JSON line per experiment CSV: {id, path, rows}."""
    lines = []
    for rec in records:
        lines.append(
            json.dumps(
                {"id": rec["id"], "path": rec["path"], "rows": int(rec["rows"])}, sort_keys=True
            )
        )
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
