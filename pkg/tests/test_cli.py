import filecmp
import json

import pytest

from windbid.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


def test_solve_day_fixture(capsys):
    assert main(["solve-day", "instance_a"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert float(out[0]) == pytest.approx(800.0, abs=1e-6)
    assert out[1] == "bid 10 0"


def test_solve_day_with_bid(capsys):
    assert main(["solve-day", "instance_a", "--bid", "12,0"]) == EXIT_OK
    assert float(capsys.readouterr().out.splitlines()[0]) == pytest.approx(700.0, abs=1e-6)


def test_usage_errors(tmp_path):
    assert main(["train", "--steps", "0", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["evaluate", "--set", "nope=1", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_missing_data_file(tmp_path):
    code = main(["evaluate", "--prices", str(tmp_path / "none.csv"), "--wind", str(tmp_path / "w.csv"),
                 "--out-dir", str(tmp_path)])
    assert code == EXIT_DATA


def _evaluate(out, data_dir):
    return main(["evaluate", "--prices", str(data_dir / "prices.csv"), "--wind", str(data_dir / "wind.csv"),
                 "--episodes", "6", "--scenarios", "3", "--seed", "2", "--out-dir", str(out)])


def test_pipeline_is_reproducible(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--days", "12", "--seed", "1", "--out-dir", str(data)]) == EXIT_OK
    assert main(["fit-noise", "--prices", str(data / "prices.csv"), "--wind", str(data / "wind.csv"),
                 "--out-dir", str(data)]) == EXIT_OK
    assert (data / "noise_models.json").exists()
    assert main(["train", "--prices", str(data / "prices.csv"), "--wind", str(data / "wind.csv"),
                 "--noise", str(data / "noise_models.json"), "--steps", "70", "--scenarios", "2",
                 "--set", "agent.batch_size=32", "--out-dir", str(data)]) == EXIT_OK
    assert (data / "agent.json").exists() and (data / "agent_curve.csv").exists()

    a, b = tmp_path / "a", tmp_path / "b"
    assert _evaluate(a, data) == EXIT_OK
    assert _evaluate(b, data) == EXIT_OK
    for name in ("eval_records.csv", "summary.csv", "histogram.csv", "ratios.csv", "plot_data.json"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name
    manifest = json.loads((a / "manifest_evaluate.json").read_text())
    assert manifest["config"]["run.seed"] == 2
    assert set(manifest["artifacts"]) >= {"eval_records.csv", "summary.csv"}

    rl = tmp_path / "rl"
    code = main(["evaluate", "--prices", str(data / "prices.csv"), "--wind", str(data / "wind.csv"),
                 "--episodes", "3", "--scenarios", "2", "--agent", f"rl={data / 'agent.json'}",
                 "--out-dir", str(rl)])
    assert code == EXIT_OK
    assert "rl," in (rl / "summary.csv").read_text()
