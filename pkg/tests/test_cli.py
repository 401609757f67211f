import csv
import json
from pathlib import Path

import msgpack
import pytest

from bellman import settings
from bellman.cli import build_parser, main
from bellman.constants import ExitCode, TRACE_FILE_SUFFIX

SAMPLE_DIR = Path(__file__).parent / "sample"
SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"
RUN_EXP = str(SAMPLE_DIR / "run_exp.json")
RUN_QUADRATIC = str(SAMPLE_DIR / "run_quadratic.json")


def read_rows(path: Path) -> list:
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


def run(tmp_path: Path, *argv: str) -> int:
    return main([*argv, "--out", str(tmp_path), "--no-cache"])


def test_version(capsys):
    with pytest.raises(SystemExit) as err_info:
        build_parser().parse_args(["--version"])
    assert err_info.value.code == 0
    assert capsys.readouterr().out.startswith("bellman ")


def test_analyze(tmp_path, capsys):
    assert run(tmp_path, "analyze", "--config", str(SAMPLES_DIR / "exp.json")) == ExitCode.OK
    content = json.loads((tmp_path / "analysis.json").read_text())
    assert content["name"] == "exp"
    assert content["minimize"] is False
    assert "ok  " in capsys.readouterr().out


def test_analyze_reports_failed_conditions(tmp_path):
    assert run(tmp_path, "analyze", "--config", str(SAMPLE_DIR / "bf_kink.json")) == ExitCode.CONDITION_FAILURE


@pytest.mark.parametrize("name", ["bf_malformed.json", "bf_gap.json", "missing.json"])
def test_input_errors(tmp_path, capsys, name):
    assert run(tmp_path, "analyze", "--config", str(SAMPLE_DIR / name)) == ExitCode.INPUT_ERROR
    assert capsys.readouterr().err.startswith("error: ")


def test_eval(tmp_path):
    assert run(tmp_path, "eval", "--config", RUN_QUADRATIC) == ExitCode.OK
    rows = read_rows(tmp_path / "eval.csv")
    assert len(rows) == 3
    for row in rows:
        assert float(row["B"]) == pytest.approx(float(row["x2"]), abs=1e-12)
        assert float(row["d2"]) == pytest.approx(1.0)


def test_eval_of_the_lower_bellman_function(tmp_path):
    assert run(tmp_path, "eval", "--config", RUN_QUADRATIC, "--minimize") == ExitCode.OK
    for row in read_rows(tmp_path / "eval.csv"):
        assert float(row["B"]) == pytest.approx(float(row["x2"]), abs=1e-12)


def test_eval_with_points_file(tmp_path):
    points = str(SAMPLE_DIR / "points.csv")
    assert run(tmp_path, "eval", "--config", RUN_QUADRATIC, "--points", points) == ExitCode.OK
    assert [row["x1"] for row in read_rows(tmp_path / "eval.csv")] == ["0", "0.5", "-1"]


def test_eval_with_missing_points_file(tmp_path):
    points = str(tmp_path / "nowhere.csv")
    assert run(tmp_path, "eval", "--config", RUN_QUADRATIC, "--points", points) == ExitCode.INPUT_ERROR


def test_eval_needs_points(tmp_path):
    config = str(SAMPLES_DIR / "exp.json")
    assert run(tmp_path, "eval", "--config", config, "--eps", "0.5") == ExitCode.INPUT_ERROR


def test_eval_needs_a_radius(tmp_path):
    points = str(SAMPLE_DIR / "points.csv")
    assert run(tmp_path, "eval", "--config", str(SAMPLES_DIR / "exp.json"), "--points", points) == ExitCode.INPUT_ERROR


def test_evolve_with_sweep(tmp_path, capsys):
    assert run(tmp_path, "evolve", "--config", RUN_EXP) == ExitCode.OK
    assert read_rows(tmp_path / "criticals.csv") == []
    assert len(read_rows(tmp_path / "segments.csv")) >= 1
    assert (tmp_path / "graph.json").exists()
    sweep = read_rows(tmp_path / "sweep.csv")
    assert sorted({float(row["eps"]) for row in sweep}) == pytest.approx([0.3, 0.4, 0.5])
    assert "0 critical points" in capsys.readouterr().out


def test_evolve_beyond_summability(tmp_path):
    config = str(SAMPLES_DIR / "exp.json")
    assert run(tmp_path, "evolve", "--config", config, "--eps", "0.99") == ExitCode.CONDITION_FAILURE


def test_evolve_stores_the_trace(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "cache_dir", tmp_path / "cache")
    monkeypatch.setattr(settings, "enable_cache", True)
    argv = ["evolve", "--config", str(SAMPLES_DIR / "exp.json"), "--eps", "0.4", "--out", str(tmp_path / "out")]
    assert main(argv) == ExitCode.OK
    (stored,) = (tmp_path / "cache" / "traces").glob(f"*{TRACE_FILE_SUFFIX}")
    assert main(argv) == ExitCode.OK
    assert list((tmp_path / "cache" / "traces").iterdir()) == [stored]


def test_optimize(tmp_path):
    assert run(tmp_path, "optimize", "--config", RUN_QUADRATIC, "--jobs", "2") == ExitCode.OK
    content = json.loads((tmp_path / "optimizers.json").read_text())
    assert content["eps"] == 0.5
    assert len(content["optimizers"]) == 3
    assert all(row["passed"] == "1" for row in read_rows(tmp_path / "optimizer_report.csv"))


def test_verify(tmp_path, capsys):
    assert run(tmp_path, "verify", "--config", RUN_QUADRATIC) == ExitCode.OK
    content = json.loads((tmp_path / "verify.json").read_text())
    assert content["passed"] is True
    assert content["admissible"] is True
    assert content["oracle"]["max_abs"] <= 1e-9
    assert (tmp_path / "oracle.csv").exists()
    assert "verification passed" in capsys.readouterr().out


def test_verify_corrupted_trace(tmp_path):
    trace = tmp_path / "trace.msgpack"
    trace.write_bytes(msgpack.packb({"format_version": "0.1"}))
    code = run(tmp_path, "verify", "--config", RUN_QUADRATIC, "--trace", str(trace))
    assert code == ExitCode.VERIFICATION_FAILURE
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is False


def test_export(tmp_path):
    assert run(tmp_path, "export", "--config", str(SAMPLES_DIR / "quartic_neg.json"), "--eps", "0.8") == ExitCode.OK
    assert (tmp_path / "foliation.svg").read_text().startswith("<?xml")
    assert json.loads((tmp_path / "graph.json").read_text())
    (table,) = tmp_path.glob("chords_*.csv")
    assert list(read_rows(table)[0]) == ["l", "a", "b", "D_L", "D_R"]
