import json
import subprocess
import sys
from importlib.resources import files

import numpy as np
import pytest

from isoglm.cli import main
from isoglm.evaluation import check_lipschitz_rows, check_step_rows, read_plot_data

TOY = str(files("isoglm") / "resources" / "toy_linear.csv")


@pytest.fixture
def linear_file(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(200, 3)) / np.sqrt(3)
    y = 0.5 + 0.4 * x[:, 0] - 0.3 * x[:, 1]
    # GLM-tron has no intercept, so the file carries a constant column.
    path = tmp_path / "lin.csv"
    np.savetxt(path, np.column_stack((x, np.ones(200), y)), delimiter=",",
               header="a,b,c,one,y", comments="")
    return path


def test_fit_noiseless_linear_glmtron_clamp(linear_file, tmp_path, capsys):
    out = tmp_path / "fit"
    code = main(["fit", "--dataset", str(linear_file), "--target", "y",
                 "--algorithms", "glmtron:clamp-identity", "--iterations", "300", "--out", str(out)])
    assert code == 0
    payload = json.loads((out / "model.json").read_text())
    entry = payload["models"]["glmtron:clamp-identity"]
    assert entry["train_error"]["mse"] <= 1e-3
    assert payload["config"]["run"]["algorithms"] == ["glmtron:clamp-identity"]
    assert str(out / "model.json") in capsys.readouterr().out


def test_fit_writes_lisotron_transfer(linear_file, tmp_path):
    out = tmp_path / "fit"
    assert main(["fit", "--dataset", str(linear_file), "--out", str(out)]) == 0
    assert check_lipschitz_rows(read_plot_data(out / "transfer_lisotron.txt"))


def test_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(["fit", "--dataset", str(missing), "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code != 0
    assert str(missing) in err
    assert len(err.strip().splitlines()) == 1


def test_zero_iterations(tmp_path, capsys):
    code = main(["fit", "--dataset", TOY, "--iterations", "0", "--out", str(tmp_path / "o")])
    assert code != 0
    assert "--iterations" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_unknown_target(tmp_path, capsys):
    code = main(["experiment", "tabular", "--dataset", TOY, "--target", "price",
                 "--out", str(tmp_path / "o")])
    assert code != 0
    assert "price" in capsys.readouterr().err


def test_unknown_algorithm(tmp_path, capsys):
    code = main(["fit", "--dataset", TOY, "--algorithms", "svm", "--out", str(tmp_path / "o")])
    assert code != 0
    assert "svm" in capsys.readouterr().err


def _synthetic(out, *extra):
    return main(["experiment", "synthetic", "--d", "40", "--m", "120", "--repeats", "1",
                 "--seed", "7", "--out", str(out), *extra])


def test_synthetic_deterministic_and_plot_data(tmp_path):
    assert _synthetic(tmp_path / "a") == 0
    assert _synthetic(tmp_path / "b") == 0
    for name in ("report.json", "folds.csv", "table_errors.csv", "table_differences.csv",
                 "transfer_lisotron.txt", "transfer_isotron.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert set(report["summary"]["normalized_mse"]) == {"lisotron", "isotron"}
    assert report["config"]["run"]["seed"] == 7
    assert check_lipschitz_rows(read_plot_data(tmp_path / "a" / "transfer_lisotron.txt"))
    assert check_step_rows(read_plot_data(tmp_path / "a" / "transfer_isotron.txt"))


def test_rerun_reproduces_report(tmp_path):
    assert _synthetic(tmp_path / "a") == 0
    assert main(["rerun", str(tmp_path / "a" / "report.json"), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "r" / "report.json").read_bytes()


def test_seed_changes_report(tmp_path):
    assert _synthetic(tmp_path / "a") == 0
    assert main(["experiment", "synthetic", "--d", "40", "--m", "120", "--repeats", "1",
                 "--seed", "8", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() != (tmp_path / "b" / "report.json").read_bytes()


def test_tabular_toy_file(tmp_path):
    out = tmp_path / "tab"
    assert main(["experiment", "tabular", "--dataset", TOY, "--target", "y", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    means = {k: v["mean"] for k, v in report["summary"]["normalized_mse"].items()}
    assert set(means) == {"lisotron", "glmtron", "isotron", "linear", "logistic", "sim"}
    assert all(0.0 < v < 1.5 for v in means.values()), means
    header, row = (out / "table_differences.csv").read_text().splitlines()
    assert header.split(",")[1] == "L-Iso"
    assert row.split(",")[1] == "0.000 ± 0.000"


def test_rate_small(tmp_path):
    out = tmp_path / "rate"
    assert main(["experiment", "rate", "--m-grid", "100,200", "--repeats", "1",
                 "--out", str(out)]) == 0
    payload = json.loads((out / "rate.json").read_text())
    assert set(payload["mean_excess_error"]["glmtron"]) == {"100", "200"}
    assert len(payload["runs"]) == 2


def test_help_lists_defaults():
    proc = subprocess.run([sys.executable, "-m", "isoglm", "experiment", "synthetic", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "default: 400" in proc.stdout and "--repeats" in proc.stdout
