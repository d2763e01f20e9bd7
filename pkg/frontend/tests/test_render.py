"""Renderer: input validation, aggregation, layout, and byte-stable output."""

import json
import math

import numpy as np
import pytest

from figrender import (
    CSV_HEADER,
    FigureSpec,
    PanelSpec,
    RenderError,
    aggregate_series,
    build_figure,
    load_figure_specs,
    load_manifest,
    load_rows,
    render_figures,
    sweep_points,
    to_db,
)
from figrender.cli import main

ALGOS = ("NEOLITHIC", "QSGD", "MEM_SGD", "DOUBLE_SQUEEZE", "EF21_SGD")


def write_csv(path, algorithms=ALGOS, trials=2, rounds=(0, 500, 1000), value=None):
    value = value or (lambda alg, tr, r: math.exp(-r / 400.0) * (1 + 0.1 * tr))
    lines = [CSV_HEADER]
    for alg in algorithms:
        for tr in range(trials):
            for r in rounds:
                lines.append(f"{alg},{tr},{r},f_gap,{value(alg, tr, r):.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines) - 1


def write_manifest(path, entries):
    lines = [json.dumps({"id": exp_id, "path": rel, "rows": rows}) for exp_id, rel, rows in entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def grid_setup(tmp_path):
    """Four panel CSVs plus a manifest, mirroring the comparison experiment."""
    ids = ("ls_top2_small", "ls_urand2_small", "ls_top2_large", "ls_urand2_large")
    entries = []
    for exp_id in ids:
        rows = write_csv(tmp_path / f"{exp_id}.csv")
        entries.append((exp_id, f"{exp_id}.csv", rows))
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, entries)
    spec = FigureSpec(
        name="comparison_grid",
        rows=2,
        cols=2,
        panels=tuple(PanelSpec(exp_id=i, title=i) for i in ids),
    )
    return manifest, spec


# -- input parsing ---------------------------------------------------------------


def test_load_rows_requires_exact_header(tmp_path):
    """A CSV with a different header is rejected with the path named."""
    bad = tmp_path / "bad.csv"
    bad.write_text("algorithm,trial,round,metric,value\n", encoding="utf-8")
    with pytest.raises(RenderError, match="bad.csv"):
        load_rows(str(bad))


def test_load_rows_field_count_and_types(tmp_path):
    """Short rows and non-numeric fields fail with line numbers."""
    p = tmp_path / "x.csv"
    p.write_text(CSV_HEADER + "\nA,0,1,f_gap\n", encoding="utf-8")
    with pytest.raises(RenderError, match="x.csv:2"):
        load_rows(str(p))
    p.write_text(CSV_HEADER + "\nA,0,one,f_gap,2.0\n", encoding="utf-8")
    with pytest.raises(RenderError, match="x.csv:2"):
        load_rows(str(p))


def test_manifest_resolves_relative_paths(tmp_path):
    """Relative CSV paths resolve against the manifest's own directory."""
    sub = tmp_path / "deep"
    sub.mkdir()
    write_csv(sub / "a.csv", algorithms=("A",), trials=1)
    manifest = sub / "m.jsonl"
    write_manifest(manifest, [("a", "a.csv", 3)])
    table = load_manifest(str(manifest))
    assert table["a"] == str(sub / "a.csv")
    assert load_rows(table["a"])


def test_manifest_rejects_duplicates_and_bad_lines(tmp_path):
    """Duplicate ids and non-JSON lines are named with their line number."""
    m = tmp_path / "m.jsonl"
    m.write_text('{"id": "a", "path": "a.csv", "rows": 1}\n{"id": "a", "path": "b.csv", "rows": 1}\n')
    with pytest.raises(RenderError, match="duplicate experiment id 'a'"):
        load_manifest(str(m))
    m.write_text("not json\n")
    with pytest.raises(RenderError, match="m.jsonl:1"):
        load_manifest(str(m))
    m.write_text('{"path": "a.csv"}\n')
    with pytest.raises(RenderError, match="'id' and 'path'"):
        load_manifest(str(m))


def test_figure_spec_validation():
    """Grid overflow, bad statistic, and bad panel kind are rejected."""
    panel = PanelSpec(exp_id="a")
    with pytest.raises(RenderError, match="exceed"):
        FigureSpec(name="f", rows=1, cols=1, panels=(panel, panel))
    with pytest.raises(RenderError, match="statistic"):
        FigureSpec(name="f", rows=1, cols=1, panels=(panel,), statistic="max")
    with pytest.raises(RenderError, match="kind"):
        FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="a", kind="bars"),))
    with pytest.raises(RenderError, match="at least one panel"):
        FigureSpec(name="f", rows=1, cols=1, panels=())


def test_load_figure_specs_file(tmp_path):
    """The YAML layout file round-trips into FigureSpec objects."""
    f = tmp_path / "figs.yaml"
    f.write_text(
        "figures:\n"
        "  - name: demo\n"
        "    rows: 1\n"
        "    cols: 2\n"
        "    statistic: median\n"
        "    legend: {A: 'Algorithm A'}\n"
        "    panels:\n"
        "      - {id: one, title: first}\n"
        "      - {id: two, kind: sweep}\n",
        encoding="utf-8",
    )
    (spec,) = load_figure_specs(str(f))
    assert spec.name == "demo" and spec.statistic == "median"
    assert spec.panels[0].title == "first" and spec.panels[1].kind == "sweep"
    assert spec.legend == {"A": "Algorithm A"}
    f.write_text("figures: []\n", encoding="utf-8")
    with pytest.raises(RenderError, match="non-empty 'figures'"):
        load_figure_specs(str(f))
    f.write_text("figures:\n  - {name: x, panels: [{title: no-id}]}\n", encoding="utf-8")
    with pytest.raises(RenderError, match="needs an 'id'"):
        load_figure_specs(str(f))


# -- aggregation -----------------------------------------------------------------


def test_to_db_floor():
    """Non-positive, tiny, and non-finite gaps all land on the -160 floor."""
    out = to_db([1.0, 1e-3, 0.0, 1e-20, float("inf"), float("nan")])
    assert out[0] == 0.0 and out[1] == pytest.approx(-30.0)
    assert out[2] == -160.0 and out[3] == -160.0
    assert out[4] == -160.0 and out[5] == -160.0
    assert to_db([0.5], floor=-10.0)[0] == pytest.approx(-math.log10(2) * 10)


def test_aggregate_excludes_diverged_trials():
    """A trial with a non-finite value is dropped from the statistic and counted."""
    rows = [
        ("A", 0, 0, "f_gap", 1.0),
        ("A", 0, 1, "f_gap", 0.5),
        ("A", 1, 0, "f_gap", 1.0),
        ("A", 1, 1, "f_gap", float("inf")),
        ("A", 2, 0, "f_gap", 3.0),
        ("A", 2, 1, "f_gap", 1.5),
    ]
    series, diverged = aggregate_series(rows, "f_gap", "mean")
    rounds, values = series["A"]
    assert rounds.tolist() == [0, 1]
    assert values.tolist() == [2.0, 1.0]
    assert diverged == {"A": 1}


def test_aggregate_mean_vs_median():
    """The two statistics disagree exactly as the trial spread dictates."""
    rows = []
    for tr, v in enumerate((1.0, 1.0, 10.0)):
        rows.append(("A", tr, 0, "f_gap", v))
    mean_series, _ = aggregate_series(rows, "f_gap", "mean")
    med_series, _ = aggregate_series(rows, "f_gap", "median")
    assert mean_series["A"][1][0] == pytest.approx(4.0)
    assert med_series["A"][1][0] == pytest.approx(1.0)


def test_aggregate_requires_matching_rounds():
    """Trials recording different rounds cannot be aggregated."""
    rows = [("A", 0, 0, "f_gap", 1.0), ("A", 1, 5, "f_gap", 1.0)]
    with pytest.raises(RenderError, match="disagree"):
        aggregate_series(rows, "f_gap", "mean")


def test_sweep_points_parse_labels():
    """R comes out of the _R<k>_ tag; unlabeled rows are an error."""
    rows = [
        ("NEO_R1_top2_het0.1_sig0.01", 0, 100, "f_gap", 1.0),
        ("NEO_R1_top2_het0.1_sig0.01", 1, 100, "f_gap", 3.0),
        ("NEO_R10_top2_het0.1_sig0.01", 0, 100, "f_gap", 0.1),
        ("NEO_R10_top2_het0.1_sig0.01", 1, 100, "f_gap", 0.3),
    ]
    Rs, vals = sweep_points(rows, "f_gap", "mean")
    assert Rs.tolist() == [1, 10]
    assert vals.tolist() == [2.0, 0.2]
    with pytest.raises(RenderError, match="lacks"):
        sweep_points([("plain", 0, 1, "f_gap", 1.0)], "f_gap", "mean")


# -- figure assembly ----------------------------------------------------------------


def test_grid_has_one_curve_per_algorithm(grid_setup):
    """The 2x2 comparison grid draws exactly one curve per configured algorithm."""
    manifest, spec = grid_setup
    fig = build_figure(spec, load_manifest(str(manifest)))
    drawn = [ax for ax in fig.axes if ax.get_visible() and ax.lines]
    assert len(drawn) == 4
    for ax in drawn:
        assert len(ax.lines) == len(ALGOS)
        assert ax.get_xlabel() == "communication rounds (thousands)"
        # x axis is in thousands of rounds
        assert max(ax.lines[0].get_xdata()) == pytest.approx(1.0)


def test_missing_id_is_named(grid_setup):
    """Referencing an id absent from the manifest fails loudly with the id."""
    manifest, spec = grid_setup
    bad = FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="nonexistent"),))
    with pytest.raises(RenderError, match="'nonexistent'"):
        build_figure(bad, load_manifest(str(manifest)))


def test_empty_log_gets_annotation(tmp_path):
    """A header-only CSV renders an empty panel with a visible warning note."""
    p = tmp_path / "empty.csv"
    p.write_text(CSV_HEADER + "\n", encoding="utf-8")
    manifest = tmp_path / "m.jsonl"
    write_manifest(manifest, [("empty", "empty.csv", 0)])
    spec = FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="empty"),))
    fig = build_figure(spec, load_manifest(str(manifest)))
    ax = fig.axes[0]
    assert not ax.lines
    assert any("no data" in t.get_text() for t in ax.texts)


def test_single_trial_single_algorithm(tmp_path):
    """One algorithm, one trial: a single curve and no aggregation artifacts."""
    p = tmp_path / "solo.csv"
    write_csv(p, algorithms=("ONLY",), trials=1, rounds=tuple(range(0, 60, 10)))
    manifest = tmp_path / "m.jsonl"
    write_manifest(manifest, [("solo", "solo.csv", 6)])
    spec = FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="solo"),))
    fig = build_figure(spec, load_manifest(str(manifest)))
    assert len(fig.axes[0].lines) == 1


def test_diverged_count_shows_in_legend(tmp_path):
    """Excluded trials are surfaced in the legend label."""
    p = tmp_path / "d.csv"
    lines = [CSV_HEADER, "A,0,0,f_gap,1.0", "A,1,0,f_gap,inf"]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = tmp_path / "m.jsonl"
    write_manifest(manifest, [("d", "d.csv", 2)])
    spec = FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="d"),))
    fig = build_figure(spec, load_manifest(str(manifest)))
    (text,) = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
    assert "1 diverged" in text


def test_sweep_panel_draws_log_axis(tmp_path):
    """Sweep panels put R on a log axis with one marker per R."""
    p = tmp_path / "s.csv"
    lines = [CSV_HEADER]
    for R in (1, 2, 5, 10, 20, 50):
        for tr in range(3):
            lines.append(f"N_R{R}_top2_het0.1_sig0.01,{tr},10000,f_gap,{1.0 / R}")
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = tmp_path / "m.jsonl"
    write_manifest(manifest, [("s", "s.csv", 18)])
    spec = FigureSpec(name="f", rows=1, cols=1, panels=(PanelSpec(exp_id="s", kind="sweep"),))
    fig = build_figure(spec, load_manifest(str(manifest)))
    ax = fig.axes[0]
    assert ax.get_xscale() == "log"
    assert len(ax.lines[0].get_xdata()) == 6


# -- end to end --------------------------------------------------------------------


def test_render_figures_writes_stable_bytes(grid_setup, tmp_path):
    """Re-rendering the same inputs produces byte-identical PNGs."""
    manifest, spec = grid_setup
    out = tmp_path / "out"
    (first,) = render_figures(str(manifest), [spec], str(out))
    blob = open(first, "rb").read()
    (second,) = render_figures(str(manifest), [spec], str(out))
    assert first == second
    assert open(second, "rb").read() == blob
    assert len(blob) > 1000


def test_cli_end_to_end(grid_setup, tmp_path, capsys):
    """The render script returns 0 and reports each written image."""
    manifest, _spec = grid_setup
    figs = tmp_path / "figs.yaml"
    figs.write_text(
        "figures:\n"
        "  - name: comparison_grid\n"
        "    rows: 2\n"
        "    cols: 2\n"
        "    panels: [ls_top2_small, ls_urand2_small, ls_top2_large, ls_urand2_large]\n",
        encoding="utf-8",
    )
    out = tmp_path / "img"
    rc = main(["--manifest", str(manifest), "--figures", str(figs), "--out", str(out)])
    assert rc == 0
    assert (out / "comparison_grid.png").exists()
    assert "comparison_grid.png" in capsys.readouterr().out


def test_cli_error_codes(grid_setup, tmp_path, capsys):
    """Bad specs exit 2 with the problem named; missing files exit 1."""
    manifest, _spec = grid_setup
    figs = tmp_path / "figs.yaml"
    figs.write_text("figures:\n  - {name: f, panels: [ghost]}\n", encoding="utf-8")
    rc = main(["--manifest", str(manifest), "--figures", str(figs), "--out", str(tmp_path)])
    assert rc == 2
    assert "'ghost'" in capsys.readouterr().err
    rc = main(["--manifest", str(tmp_path / "missing.jsonl"), "--figures", str(figs), "--out", str(tmp_path)])
    assert rc == 1


def test_render_does_not_mutate_inputs(grid_setup, tmp_path):
    """Rendering leaves the CSVs and manifest bytes untouched."""
    manifest, spec = grid_setup
    before = {p: p.read_bytes() for p in manifest.parent.glob("*.csv")}
    before[manifest] = manifest.read_bytes()
    render_figures(str(manifest), [spec], str(tmp_path / "o"))
    for p, blob in before.items():
        assert p.read_bytes() == blob
