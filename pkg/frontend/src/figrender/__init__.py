"""Figure rendering for communication-compression experiment logs.

Consumes experiment CSVs (header ``algorithm,trial,comm_round,metric,value``)
through a manifest (one JSON object per line: ``{id, path, rows}``) and
renders multi-panel convergence figures: x is communication rounds in
thousands, y is 10*log10 of the aggregated optimality gap floored at -160 dB.
Files are the only interface to the experiment package; nothing is imported
from it.

Panels come in two kinds: ``series`` plots one aggregated curve per
algorithm over rounds; ``sweep`` reads one best-gap row per (R, trial) from
labels of the form ``<base>_R<k>_...`` and plots the aggregate against R.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np
import yaml
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "CSV_HEADER",
    "DB_FLOOR",
    "FigureSpec",
    "PanelSpec",
    "RenderError",
    "aggregate_series",
    "build_figure",
    "load_figure_specs",
    "load_manifest",
    "load_rows",
    "render_figures",
    "sweep_points",
    "to_db",
]

CSV_HEADER = "algorithm,trial,comm_round,metric,value"
DB_FLOOR = -160.0

_STATISTICS = ("mean", "median")
_KINDS = ("series", "sweep")
_R_LABEL = re.compile(r"_R(\d+)_")

# tab10 hex values, assigned to sorted labels so colors never depend on row order
_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class RenderError(ValueError):
    """Bad manifest, spec, or CSV input."""


@dataclass(frozen=True)
class PanelSpec:
    """One subplot: an experiment id plus how to read and title it."""

    exp_id: str
    title: str = ""
    kind: str = "series"
    metric: str = "f_gap"


@dataclass(frozen=True)
class FigureSpec:
    """One output image: a grid of panels sharing statistic and floor."""

    name: str
    rows: int
    cols: int
    panels: tuple
    statistic: str = "mean"
    db_floor: float = DB_FLOOR
    legend: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name or "/" in self.name:
            raise RenderError(f"figure name must be a plain file stem, got {self.name!r}")
        if self.rows < 1 or self.cols < 1:
            raise RenderError(f"{self.name}: grid must be at least 1x1")
        if not self.panels:
            raise RenderError(f"{self.name}: at least one panel is required")
        if len(self.panels) > self.rows * self.cols:
            raise RenderError(
                f"{self.name}: {len(self.panels)} panels exceed the {self.rows}x{self.cols} grid"
            )
        if self.statistic not in _STATISTICS:
            raise RenderError(f"{self.name}: statistic must be one of {_STATISTICS}")
        for panel in self.panels:
            if panel.kind not in _KINDS:
                raise RenderError(f"{self.name}: panel kind must be one of {_KINDS}")


# -- input files -----------------------------------------------------------------


def load_figure_specs(path: str) -> list:
    """Parse the --figures file (YAML or JSON mapping with a 'figures' list)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or not isinstance(raw.get("figures"), list) or not raw["figures"]:
        raise RenderError(f"{path}: expected a mapping with a non-empty 'figures' list")
    specs = []
    for i, block in enumerate(raw["figures"]):
        where = f"{path}: figures[{i}]"
        if not isinstance(block, dict):
            raise RenderError(f"{where} must be a mapping")
        unknown = set(block) - {"name", "rows", "cols", "panels", "statistic", "db_floor", "legend"}
        if unknown:
            raise RenderError(f"{where}: unknown keys {sorted(unknown)}")
        panels_raw = block.get("panels")
        if not isinstance(panels_raw, list) or not panels_raw:
            raise RenderError(f"{where}: 'panels' must be a non-empty list")
        panels = []
        for j, pb in enumerate(panels_raw):
            if isinstance(pb, str):
                pb = {"id": pb}
            if not isinstance(pb, dict) or "id" not in pb:
                raise RenderError(f"{where}: panels[{j}] needs an 'id'")
            bad = set(pb) - {"id", "title", "kind", "metric"}
            if bad:
                raise RenderError(f"{where}: panels[{j}]: unknown keys {sorted(bad)}")
            panels.append(
                PanelSpec(
                    exp_id=str(pb["id"]),
                    title=str(pb.get("title", pb["id"])),
                    kind=str(pb.get("kind", "series")),
                    metric=str(pb.get("metric", "f_gap")),
                )
            )
        legend = block.get("legend", {})
        if not isinstance(legend, dict):
            raise RenderError(f"{where}: 'legend' must be a mapping")
        specs.append(
            FigureSpec(
                name=str(block.get("name", f"figure{i}")),
                rows=int(block.get("rows", 1)),
                cols=int(block.get("cols", len(panels))),
                panels=tuple(panels),
                statistic=str(block.get("statistic", "mean")),
                db_floor=float(block.get("db_floor", DB_FLOOR)),
                legend={str(k): str(v) for k, v in legend.items()},
            )
        )
    return specs


def load_manifest(path: str) -> dict:
    """id -> absolute CSV path; relative paths resolve against the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    table = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RenderError(f"{path}:{ln}: not a JSON object: {exc}") from None
            if not isinstance(rec, dict) or "id" not in rec or "path" not in rec:
                raise RenderError(f"{path}:{ln}: each line needs 'id' and 'path'")
            exp_id = str(rec["id"])
            if exp_id in table:
                raise RenderError(f"{path}:{ln}: duplicate experiment id {exp_id!r}")
            csv_path = str(rec["path"])
            if not os.path.isabs(csv_path):
                csv_path = os.path.normpath(os.path.join(base, csv_path))
            table[exp_id] = csv_path
    return table


def load_rows(path: str) -> list:
    """(algorithm, trial, comm_round, metric, value) tuples from one CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise RenderError(f"{path}: expected header {CSV_HEADER!r}, got {lines[0] if lines else ''!r}")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise RenderError(f"{path}:{ln}: expected 5 fields, got {len(parts)}")
        alg, trial, rnd, metric, value = parts
        try:
            rows.append((alg, int(trial), int(rnd), metric, float(value)))
        except ValueError as exc:
            raise RenderError(f"{path}:{ln}: {exc}") from None
    return rows


# -- aggregation -----------------------------------------------------------------


def to_db(values, floor: float = DB_FLOOR) -> np.ndarray:
    """Elementwise 10*log10, with non-positive or non-finite input on the floor."""
    values = np.asarray(values, dtype=np.float64)
    cut = 10.0 ** (floor / 10.0)
    safe = np.where(np.isfinite(values) & (values > cut), values, cut)
    return 10.0 * np.log10(safe)


def _stat(matrix: np.ndarray, statistic: str) -> np.ndarray:
    return matrix.mean(axis=0) if statistic == "mean" else np.median(matrix, axis=0)


def aggregate_series(rows, metric: str, statistic: str):
    """Per-algorithm (rounds, statistic-of-gap) arrays, skipping diverged trials.

    A trial is diverged when any of its recorded values is non-finite; such
    trials are excluded from the statistic and reported in the second return
    value as algorithm -> excluded count.
    """
    by_trial: dict = {}
    bad = set()
    for alg, trial, rnd, m, value in rows:
        if m != metric:
            continue
        by_trial.setdefault((alg, trial), {})[rnd] = value
        if not math.isfinite(value):
            bad.add((alg, trial))
    grouped: dict = {}
    diverged: dict = {}
    for (alg, trial), per_round in sorted(by_trial.items()):
        if (alg, trial) in bad:
            diverged[alg] = diverged.get(alg, 0) + 1
            continue
        grouped.setdefault(alg, []).append(per_round)
    series = {}
    for alg, trails in grouped.items():
        rounds = sorted(trails[0])
        for other in trails[1:]:
            if sorted(other) != rounds:
                raise RenderError(f"trials of {alg!r} disagree on recorded rounds")
        matrix = np.array([[tr[r] for r in rounds] for tr in trails])
        series[alg] = (np.asarray(rounds, dtype=np.int64), _stat(matrix, statistic))
    return series, diverged


def sweep_points(rows, metric: str, statistic: str):
    """(R values, statistic-of-gap) from one-row-per-trial sweep logs."""
    by_R: dict = {}
    for alg, _trial, _rnd, m, value in rows:
        if m != metric:
            continue
        match = _R_LABEL.search(alg)
        if match is None:
            raise RenderError(f"sweep label {alg!r} lacks an _R<k>_ tag")
        by_R.setdefault(int(match.group(1)), []).append(value)
    if not by_R:
        return np.array([], dtype=np.int64), np.array([])
    Rs = np.array(sorted(by_R), dtype=np.int64)
    vals = np.array([_stat(np.asarray(by_R[int(R)], dtype=np.float64), statistic) for R in Rs])
    return Rs, vals


# -- drawing ---------------------------------------------------------------------


def _color_map(labels) -> dict:
    ordered = sorted(labels)
    return {lab: _PALETTE[i % len(_PALETTE)] for i, lab in enumerate(ordered)}


def _draw_series(ax, panel, spec, rows):
    series, diverged = aggregate_series(rows, panel.metric, spec.statistic)
    colors = _color_map(series)
    for alg in sorted(series):
        rounds, values = series[alg]
        label = spec.legend.get(alg, alg)
        if diverged.get(alg):
            label += f" ({diverged[alg]} diverged)"
        ax.plot(rounds / 1000.0, to_db(values, spec.db_floor), label=label, color=colors[alg], linewidth=1.4)
    ax.set_xlabel("communication rounds (thousands)")
    if series:
        ax.legend(fontsize=7)


def _draw_sweep(ax, panel, spec, rows):
    Rs, vals = sweep_points(rows, panel.metric, spec.statistic)
    if Rs.size:
        ax.plot(Rs, to_db(vals, spec.db_floor), marker="o", color=_PALETTE[0], linewidth=1.4)
        ax.set_xscale("log")
        ax.set_xticks(Rs.tolist())
        ax.get_xaxis().set_major_formatter("{x:g}")
    ax.set_xlabel("compression rounds R")


def build_figure(spec: FigureSpec, manifest: dict) -> Figure:
    """Lay the panels out on a rows x cols grid; unused slots are hidden."""
    for panel in spec.panels:
        if panel.exp_id not in manifest:
            raise RenderError(f"experiment id {panel.exp_id!r} not found in the manifest")
    fig = Figure(figsize=(4.6 * spec.cols, 3.4 * spec.rows), dpi=120)
    FigureCanvasAgg(fig)
    axes = fig.subplots(spec.rows, spec.cols, squeeze=False)
    flat = [ax for row in axes for ax in row]
    for ax in flat[len(spec.panels) :]:
        ax.set_axis_off()
    for panel, ax in zip(spec.panels, flat):
        rows = load_rows(manifest[panel.exp_id])
        ax.set_title(panel.title, fontsize=9)
        ax.set_ylabel("f - f* (dB)")
        if not rows:
            ax.annotate(
                "no data", (0.5, 0.5), xycoords="axes fraction",
                ha="center", va="center", fontsize=11, color="#888888",
            )
        elif panel.kind == "series":
            _draw_series(ax, panel, spec, rows)
        else:
            _draw_sweep(ax, panel, spec, rows)
    fig.tight_layout()
    return fig


def render_figures(manifest_path: str, specs, out_dir: str) -> list:
    """One PNG per figure spec; returns the written paths."""
    manifest = load_manifest(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for spec in specs:
        fig = build_figure(spec, manifest)
        path = os.path.join(out_dir, f"{spec.name}.png")
        # empty metadata keeps the PNG bytes identical across re-renders
        fig.savefig(path, metadata={})
        written.append(path)
    return written
