import json

import numpy as np
import pandas as pd
import pytest

from src.cli import EXIT_FAILURE, main
from src.domains.bench.schemas import RESULT_COLUMNS, SUMMARY_COLUMNS
from tests.conftest import make_logistic_data


@pytest.fixture
def data_csv(tmp_path):
    data = make_logistic_data(1000, [0.1, 0.5, 0.5], seed=5)
    path = tmp_path / "data.csv"
    pd.DataFrame({"x1": data.X[:, 0], "x2": data.X[:, 1], "y": data.y}).to_csv(path, index=False)
    return path


def _subsample(data_csv, out, *extra):
    argv = ["subsample", "--data", str(data_csv), "--response", "y", "--model", "logistic",
            "--k", "200", "--space", "full", "--seed", "3", "--out", str(out), *extra]
    return main(argv)


def test_subsample_writes_indices_and_sidecar(data_csv, tmp_path):
    out = tmp_path / "out" / "indices.txt"
    assert _subsample(data_csv, out) == 0
    indices = [int(line) for line in out.read_text().split()]
    assert len(indices) == len(set(indices)) == 200
    assert all(0 <= i < 1000 for i in indices)
    sidecar = json.loads(out.with_suffix(".json").read_text())
    assert sidecar["family"] == "logistic"
    assert sidecar["k0"] == 40
    assert sidecar["method"] == "odbss-2"
    assert "timings_ms" in sidecar


def test_subsample_without_timings_is_byte_identical(data_csv, tmp_path):
    first, second = tmp_path / "a.txt", tmp_path / "b.txt"
    assert _subsample(data_csv, first, "--no-timings") == 0
    assert _subsample(data_csv, second, "--no-timings") == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.with_suffix(".json").read_bytes() == second.with_suffix(".json").read_bytes()
    assert "timings_ms" not in json.loads(first.with_suffix(".json").read_text())


def test_design_command(tmp_path):
    candidates = tmp_path / "candidates.csv"
    pd.DataFrame({"x": np.linspace(-1.0, 1.0, 11)}).to_csv(candidates, index=False)
    out = tmp_path / "design.json"
    assert main(["design", "--candidates", str(candidates), "--model", "linear",
                 "--beta", "0,0", "--criterion", "D", "--out", str(out)]) == 0
    design = json.loads(out.read_text())
    assert sum(design["weights"]) == pytest.approx(1.0)
    assert design["certified"] is True


def test_bench_run_and_summarize(tmp_path):
    config = {
        "scenarios": [{"id": "tiny", "p": 2, "n": 200}],
        "methods": ["uniform", "full"],
        "k_grid": [100],
        "replicates": 3,
        "seed": 1,
        "record_timings": False,
    }
    config_path = tmp_path / "bench.json"
    config_path.write_text(json.dumps(config))
    results = tmp_path / "results.csv"
    assert main(["bench", "--config", str(config_path), "--out", str(results)]) == 0
    table = pd.read_csv(results)
    assert list(table.columns) == RESULT_COLUMNS
    assert len(table) == 6

    summary = tmp_path / "summary.csv"
    assert main(["bench", "summarize", "--in", str(results), "--out", str(summary)]) == 0
    summary_table = pd.read_csv(summary)
    assert list(summary_table.columns) == SUMMARY_COLUMNS
    assert set(summary_table["n_reps"]) == {3}


def test_bench_replicates_flag_overrides_config(tmp_path):
    config = {"scenarios": [{"id": "tiny", "p": 2, "n": 200}], "methods": ["uniform"], "k_grid": [50], "replicates": 5}
    config_path = tmp_path / "bench.json"
    config_path.write_text(json.dumps(config))
    results = tmp_path / "results.csv"
    assert main(["bench", "--config", str(config_path), "--out", str(results), "--replicates", "2"]) == 0
    assert len(pd.read_csv(results)) == 2


def test_failures_exit_with_status_two(data_csv, tmp_path):
    out = tmp_path / "indices.txt"
    assert main(["subsample", "--data", str(tmp_path / "missing.csv"), "--model", "linear",
                 "--k", "10", "--out", str(out)]) == EXIT_FAILURE
    assert main(["subsample", "--data", str(data_csv), "--response", "y", "--model", "logistic",
                 "--k", "1", "--out", str(out)]) == EXIT_FAILURE
    assert main(["subsample", "--data", str(data_csv), "--response", "y", "--model", "logistic",
                 "--k", "1000", "--out", str(out)]) == EXIT_FAILURE
    assert main(["bench", "summarize", "--out", str(tmp_path / "s.csv")]) == EXIT_FAILURE
    assert not out.exists()


def test_unknown_model_is_a_usage_error(data_csv, tmp_path):
    with pytest.raises(SystemExit):
        main(["subsample", "--data", str(data_csv), "--model", "probit", "--k", "10", "--out", str(tmp_path / "o")])
