from __future__ import annotations

import csv
import json

import pytest
from click.testing import CliRunner

from consolidation.cli import main

import micro_fixture as mf

from fixture_paths import MICRO


@pytest.fixture()
def runner():
    return CliRunner()


def _invoke(runner, run_dir, *args, config=MICRO / "config.yaml"):
    return runner.invoke(
        main, ["--run-dir", str(run_dir), "--config", str(config), *args]
    )


def _read_table(run_dir):
    with open(run_dir / "report" / "retention_table.csv", newline="") as f:
        return {row["condition"]: row for row in csv.DictReader(f)}


def test_run_all_offline_matches_hand_computed_cells(runner, tmp_path):
    run_dir = tmp_path / "run"
    result = _invoke(runner, run_dir, "run-all")
    assert result.exit_code == 0, result.output

    table = _read_table(run_dir)
    assert set(table) == set(mf.EXPECTED_CELLS)
    for condition, cells in mf.EXPECTED_CELLS.items():
        for category, expected in cells.items():
            got = float(table[condition][f"{category}_mean"])
            assert got == pytest.approx(expected, abs=0.05), (condition, category)

    # every stage left its marker and its artifacts
    markers = {p.stem for p in (run_dir / "markers").glob("*.done")}
    assert {"ingest", "compact", "reflect", "synthesize", "train", "analyze", "report"} <= markers
    assert (run_dir / "analysis" / "scores.json").exists()
    assert (run_dir / "report" / "summary.md").exists()


def test_stage_chain_dependency_enforced(runner, tmp_path):
    run_dir = tmp_path / "run"
    assert _invoke(runner, run_dir, "ingest").exit_code == 0
    result = _invoke(runner, run_dir, "evaluate", "consolidated:8")
    assert result.exit_code == 3
    assert "train" in result.output


def test_reflect_requires_compaction_artifacts(runner, tmp_path):
    run_dir = tmp_path / "run"
    assert _invoke(runner, run_dir, "ingest").exit_code == 0
    result = _invoke(runner, run_dir, "reflect")
    assert result.exit_code == 3


def test_rerun_is_a_noop(runner, tmp_path):
    run_dir = tmp_path / "run"
    assert _invoke(runner, run_dir, "ingest").exit_code == 0
    again = _invoke(runner, run_dir, "ingest")
    assert again.exit_code == 0
    assert "already complete" in again.output


def test_marker_delete_reproduces_identical_artifacts(runner, tmp_path):
    run_dir = tmp_path / "run"
    assert _invoke(runner, run_dir, "run-all").exit_code == 0
    table = (run_dir / "report" / "retention_table.csv").read_bytes()
    summary = (run_dir / "report" / "summary.md").read_bytes()
    scores = (run_dir / "analysis" / "scores.json").read_bytes()

    (run_dir / "markers" / "analyze.done").unlink()
    (run_dir / "markers" / "report.done").unlink()
    assert _invoke(runner, run_dir, "analyze").exit_code == 0
    assert _invoke(runner, run_dir, "report").exit_code == 0

    assert (run_dir / "report" / "retention_table.csv").read_bytes() == table
    assert (run_dir / "report" / "summary.md").read_bytes() == summary
    assert (run_dir / "analysis" / "scores.json").read_bytes() == scores


def test_stagewise_run_equals_run_all(runner, tmp_path):
    staged = tmp_path / "staged"
    for args in (
        ("ingest",),
        ("compact",),
        ("reflect",),
        ("synthesize",),
        ("train",),
        ("evaluate", "no_context"),
        ("evaluate", "full_context"),
        ("evaluate", "compaction:1"),
        ("evaluate", "consolidated:8"),
        ("analyze",),
        ("report",),
    ):
        result = _invoke(runner, staged, *args)
        assert result.exit_code == 0, (args, result.output)

    oneshot = tmp_path / "oneshot"
    assert _invoke(runner, oneshot, "run-all").exit_code == 0
    assert (staged / "report" / "retention_table.csv").read_bytes() == (
        oneshot / "report" / "retention_table.csv"
    ).read_bytes()


def test_config_unknown_key_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("corpus_dir: corpus\nmystery_knob: 3\n")
    result = _invoke(runner, tmp_path / "run", "ingest", config=bad)
    assert result.exit_code == 2
    assert "mystery_knob" in result.output


def test_ingest_writes_provenance(runner, tmp_path):
    run_dir = tmp_path / "run"
    assert _invoke(runner, run_dir, "ingest").exit_code == 0
    assert (run_dir / "config.resolved.yaml").exists()
    checksums = json.loads((run_dir / "prompts.sha256").read_text())
    assert set(checksums) == {"reflect", "synthesize", "summarize", "continue", "judge"}
    validation = json.loads((run_dir / "validation.json").read_text())
    assert validation["totals"] == {"semantic": 3, "procedural": 3, "episodic": 4}
