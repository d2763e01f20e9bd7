"""Command-line entry point: configs in, CSVs and manifests out.

Subcommands:
  run                   execute an experiment config through run_experiment
  sweep-r               execute the compression-length sweep (sweep_R)
  validate-compressors  Monte-Carlo check of every zoo member's claimed class
  hard-instance         traced adversarial run emitting a progress CSV
  render-manifest       index experiment CSVs into a manifest for the renderer

Exit codes: 0 success, 1 runtime failure, 2 validation failure, 64 usage.
Configs are JSON or YAML mappings; --set key=value overrides (dotted paths,
JSON-parsed values) apply after the file is read and are echoed to the log.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import yaml

from .compressors import default_zoo, estimate_class
from .core import StreamContext
from .harness import (
    ConfigError,
    load_csv,
    run_experiment,
    sweep_R,
    validate_config,
    write_manifest,
)
from .hard_instances import (
    adversarial_sparsifier,
    build_chain,
    progress_bound_frequency,
    traced_run,
)

__all__ = ["main"]

EX_OK = 0
EX_RUNTIME = 1
EX_VALIDATION = 2
EX_USAGE = 64

_log = logging.getLogger("commopt.cli")

_SWEEP_DEFAULT_R = "1,2,5,10,20,50"


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code the scripts expect."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _kv(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, value


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit int")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _parse_value(text: str):
    """JSON if it parses (numbers, bools, lists), raw string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith((".yaml", ".yml")):
        raw = yaml.safe_load(text)
    elif path.endswith(".json"):
        raw = json.loads(text)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return raw


def _apply_override(raw: dict, key: str, value):
    """Set a dotted path, indexing lists by integer segment."""
    parts = key.split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"override {key}: bad list index {part!r}") from None
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"override {key}: {part!r} is not a section")
        else:
            raise ConfigError(f"override {key}: {part!r} is not a section")
    leaf = parts[-1]
    if isinstance(node, list):
        try:
            node[int(leaf)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"override {key}: bad list index {leaf!r}") from None
    else:
        node[leaf] = value


def _prepare_raw(args) -> dict:
    """Load the config file, then apply --set/--seed/--out on top."""
    raw = _load_config(args.config)
    for key, text in args.set or []:
        value = _parse_value(text)
        _apply_override(raw, key, value)
        _log.info("override %s = %r", key, value)
    if args.seed is not None:
        raw["master_seed"] = args.seed
        _log.info("override master_seed = %d", args.seed)
    if args.out and isinstance(raw.get("output"), str):
        raw["output"] = os.path.join(args.out, os.path.basename(raw["output"]))
        _log.info("output redirected to %s", raw["output"])
    return raw


def _require_config(args) -> bool:
    if args.config and os.path.isfile(args.config):
        return True
    args.parser.print_usage(sys.stderr)
    print(f"{args.parser.prog}: error: config file not found: {args.config}", file=sys.stderr)
    return False


def cmd_run(args) -> int:
    if not _require_config(args):
        return EX_USAGE
    cfg = validate_config(_prepare_raw(args))
    log = run_experiment(cfg, jobs=args.jobs)
    diverged = log.diverged_cells()
    print(f"wrote {cfg.output}: {len(log.rows)} rows")
    if diverged:
        print(f"diverged cells: {diverged}")
    return EX_OK


def cmd_sweep_r(args) -> int:
    if not _require_config(args):
        return EX_USAGE
    cfg = validate_config(_prepare_raw(args), require_R=False)
    log = sweep_R(cfg, args.r_values, jobs=args.jobs)
    print(f"wrote {cfg.output}: {len(log.rows)} rows")
    return EX_OK


def cmd_validate_compressors(args) -> int:
    seed = args.seed if args.seed is not None else 7
    draws = args.draws
    ctx = StreamContext(seed, 0, "compressor-validation")
    header = f"{'compressor':34} {'d':>3} {'claim':>16} {'ratio_hat':>12} {'result':>6}"
    print(header)
    print("-" * len(header))
    failures = 0
    total = 0
    for d in args.dims:
        for spec in default_zoo(d):
            stream = ctx.child(f"{spec.label()}-d{d}").worker(0, "compress")
            est = estimate_class(spec, draws, d, stream)
            ok = est.claim_ok() and est.per_sample_ok()
            omega = spec.claimed_omega(d)
            delta = spec.claimed_delta(d)
            claim = f"omega={omega:g}" if omega is not None else f"delta={delta:g}"
            print(
                f"{spec.label():34} {d:>3} {claim:>16} {est.ratio_hat:>12.5g} "
                f"{'pass' if ok else 'FAIL':>6}"
            )
            failures += not ok
            total += 1
    print(f"{total - failures}/{total} claims confirmed")
    return EX_OK if failures == 0 else EX_VALIDATION


_TRACE_DEFAULTS = {
    "omega": 4.0,
    "T": 100,
    "lr": 0.5,
    "name": "QSGD",
    "contractive": False,
    "d": None,
    "runs": 0,
}


def cmd_hard_instance(args) -> int:
    params = dict(_TRACE_DEFAULTS)
    for key, text in args.set or []:
        if key not in params:
            raise ConfigError(
                f"unknown hard-instance parameter {key!r}; expected one of "
                f"{sorted(params)}"
            )
        params[key] = _parse_value(text)
        _log.info("override %s = %r", key, params[key])
    seed = args.seed if args.seed is not None else 2024
    T = int(params["T"])
    d = int(params["d"]) if params["d"] is not None else T + 2
    omega = float(params["omega"])
    problem = build_chain("GC_Nesterov", n=2, L=1.0, d=d, Delta_x=1.0)
    spec = adversarial_sparsifier(omega, contractive=bool(params["contractive"]))
    trace = traced_run(
        str(params["name"]),
        problem,
        spec,
        float(params["lr"]),
        T,
        StreamContext(seed, 0, "prog-trace-demo"),
    )
    out_dir = args.out or "."
    path = os.path.join(out_dir, "prog_trace.csv")
    trace.write_csv(path)
    bound = math.e * T / (1.0 + trace.omega)
    print(f"wrote {path}: {T + 1} rows")
    print(
        f"B_T = {int(trace.B[-1])}, bound e*T/(1+omega) = {bound:.4g}, "
        f"within bound: {not trace.exceeds_bound()}"
    )
    runs = int(params["runs"])
    if runs > 0:
        freq = progress_bound_frequency(problem, spec, float(params["lr"]), T, runs, seed)
        print(f"bound exceeded in {freq:.4g} of {runs} runs (tolerance 1/e = {math.exp(-1):.4g})")
    return EX_OK


def cmd_render_manifest(args) -> int:
    out_dir = args.out or "."
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    records = []
    for csv_path in args.csvs:
        log = load_csv(csv_path)
        rel = os.path.relpath(os.path.abspath(csv_path), os.path.abspath(out_dir))
        records.append(
            {
                "id": os.path.splitext(os.path.basename(csv_path))[0],
                "path": rel,
                "rows": len(log.rows),
            }
        )
    write_manifest(records, manifest_path)
    print(f"wrote {manifest_path}: {len(records)} experiments")
    return EX_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="commopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_text, *, config=False, jobs=False, sets=False, out=False):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", metavar="PATH", required=True, help="experiment config (JSON or YAML)")
        p.add_argument("--seed", type=_u64, default=None, help="master seed override")
        if jobs:
            p.add_argument("--jobs", type=_positive_int, default=None, help="parallel trial cells")
        if sets:
            p.add_argument("--set", type=_kv, action="append", metavar="KEY=VALUE", help="config override, repeatable")
        if out:
            p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        p.set_defaults(func=func, parser=p)
        return p

    add("run", cmd_run, "run an experiment config", config=True, jobs=True, sets=True, out=True)
    p = add("sweep-r", cmd_sweep_r, "sweep compression rounds R", config=True, jobs=True, sets=True, out=True)
    p.add_argument(
        "--r-values",
        type=_int_list,
        default=_int_list(_SWEEP_DEFAULT_R),
        metavar="R1,R2,...",
        help=f"R grid (default {_SWEEP_DEFAULT_R})",
    )
    p = add("validate-compressors", cmd_validate_compressors, "Monte-Carlo check of compressor claims")
    p.add_argument("--draws", type=_positive_int, default=100_000, help="draws per zoo member")
    p.add_argument("--dims", type=_int_list, default=[2, 10, 50], metavar="D1,D2,...", help="dimensions to test")
    add("hard-instance", cmd_hard_instance, "traced adversarial-compression run", sets=True, out=True)
    p = add("render-manifest", cmd_render_manifest, "index CSVs into manifest.jsonl", out=True)
    p.add_argument("csvs", nargs="+", metavar="CSV", help="experiment CSV files")
    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
        )
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"commopt: config error: {exc}", file=sys.stderr)
        return EX_VALIDATION
    except FileNotFoundError as exc:
        print(f"commopt: file not found: {exc.filename or exc}", file=sys.stderr)
        return EX_RUNTIME
    except Exception as exc:  # runtime failures keep the 1/2 distinction
        print(f"commopt: error: {exc}", file=sys.stderr)
        return EX_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
