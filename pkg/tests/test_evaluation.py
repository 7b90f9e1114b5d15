import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from isoglm.data import LabeledDataset, generate_synthetic_sim, make_folds
from isoglm.errors import InvalidInputError
from isoglm.evaluation import (
    ConstantModel,
    ExperimentReport,
    check_lipschitz_rows,
    check_step_rows,
    empirical_excess_error,
    empirical_sq_error,
    error_report,
    fit_with_selection,
    holdout_select,
    read_plot_data,
    resolve_algorithm,
    run_cv_experiment,
    split_holdout,
    write_plot_data,
)
from isoglm.hypothesis import Hypothesis, LinearDirection, TransferSpec
from isoglm.isotonic import MonotoneFn
from isoglm.learners import TrainingTrace


def _const(v, d=1):
    return Hypothesis(LinearDirection(np.zeros(d)), TransferSpec.from_fn(MonotoneFn([0.0], [v])))


def test_sq_error_matches_fsum():
    rng = np.random.default_rng(0)
    data = LabeledDataset(rng.normal(size=(200, 2)), rng.random(200))
    h = Hypothesis(LinearDirection([0.3, -0.2]), TransferSpec.known("sigmoid-rescaled"))
    p = h.predict(data.features)
    oracle = math.fsum((a - b) ** 2 for a, b in zip(p, data.targets)) / data.m
    assert abs(empirical_sq_error(h, data) - oracle) <= 1e-12


def test_mean_prediction_error_is_variance():
    y = np.random.default_rng(1).random(50)
    data = LabeledDataset(np.zeros((50, 1)), y)
    model = ConstantModel(float(y.mean()))
    assert empirical_sq_error(model, data) == pytest.approx(np.var(y), abs=1e-15)
    assert abs(error_report(model, data).normalized_mse - 1.0) <= 1e-12


def test_excess_error_of_constant_half_on_synthetic():
    data = generate_synthetic_sim(20, 20_000, 0)
    # ((1 + x1)/2 - 1/2)^2 averages x1^2 / 4 = (2/3) / 4.
    assert empirical_excess_error(ConstantModel(0.5), data) == pytest.approx(1 / 6, abs=0.01)
    assert empirical_excess_error(data.ground_truth, data) == 0.0


def test_excess_error_needs_ground_truth():
    data = LabeledDataset([[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(InvalidInputError):
        empirical_excess_error(ConstantModel(0.5), data)
    assert error_report(ConstantModel(0.5), data).excess_error is None


def test_error_report_rejects_constant_targets():
    with pytest.raises(InvalidInputError):
        error_report(ConstantModel(0.5), LabeledDataset([[0.0], [1.0]], [0.3, 0.3]))


@pytest.mark.parametrize("values, expected", [
    ([0.5, 0.3, 0.4], 1),
    ([0.2, 0.2, 0.4], 0),
    ([0.7], 0),
])
def test_holdout_select(values, expected):
    holdout = LabeledDataset([[0.0]], [0.0])
    # Constant hypotheses with value sqrt(e) have hold-out error exactly e on target 0.
    trace = TrainingTrace([_const(math.sqrt(v)) for v in values], [0.0] * len(values))
    h, idx = holdout_select(trace, holdout)
    assert idx == expected
    assert h is trace.hypotheses[expected]


def test_holdout_select_is_exact_argmin():
    rng = np.random.default_rng(3)
    holdout = LabeledDataset(rng.random((30, 1)), rng.random(30))
    trace = TrainingTrace([_const(v) for v in rng.random(15)], [0.0] * 15)
    h, _ = holdout_select(trace, holdout)
    errs = [empirical_sq_error(t, holdout) for t in trace.hypotheses]
    assert empirical_sq_error(h, holdout) <= min(errs)


def test_holdout_select_empty_trace():
    with pytest.raises(InvalidInputError):
        holdout_select(TrainingTrace([], []), LabeledDataset([[0.0]], [0.0]))


def test_split_holdout():
    fit, hold = split_holdout(np.arange(100), 0.2, 0)
    assert (fit.size, hold.size) == (80, 20)
    assert np.intersect1d(fit, hold).size == 0
    with pytest.raises(InvalidInputError):
        split_holdout(np.arange(1), 0.2, 0)
    with pytest.raises(InvalidInputError):
        split_holdout(np.arange(10), 0.9, 0)


def test_fit_with_selection_reports_budget():
    data = generate_synthetic_sim(10, 100, 0)
    model, idx, used = fit_with_selection("lisotron", data, None, 0.2, 0)
    assert used == math.ceil(2 * math.sqrt(80))
    assert 0 <= idx < used
    _, idx, used = fit_with_selection("linear", data, None, 0.2, 0)
    assert idx is None and used == 0


def test_unknown_algorithm():
    with pytest.raises(InvalidInputError):
        resolve_algorithm("svm")
    assert resolve_algorithm("glmtron:ramp")[0]


# -- cross-validation reports ------------------------------------------------

@pytest.fixture(scope="module")
def report():
    data = generate_synthetic_sim(30, 200, 0)
    return run_cv_experiment(data, ["lisotron", "isotron", "mean", "linear"],
                             make_folds(200, 5, 1), iteration_budget=15)


def test_report_aggregates_match_folds(report):
    for alg, stats in report.summary().items():
        vals = np.array([f.errors[alg].normalized_mse for f in report.folds])
        assert abs(stats["mean"] - vals.mean()) <= 1e-12
        assert abs(stats["std"] - vals.std(ddof=1)) <= 1e-12


def test_differences_match_folds(report):
    diffs = report.differences()
    assert diffs["lisotron"] == {"mean": 0.0, "std": 0.0}
    per_fold = np.array([f.errors["isotron"].normalized_mse - f.errors["lisotron"].normalized_mse
                         for f in report.folds])
    assert abs(diffs["isotron"]["mean"] - per_fold.mean()) <= 1e-12


def test_mean_baseline_close_to_one(report):
    # Train mean on a test fold: normalized error is 1 + (shift of means)^2 / var.
    assert report.summary()["mean"]["mean"] == pytest.approx(1.0, abs=0.1)
    assert all(f.errors["mean"].normalized_mse >= 1.0 - 1e-12 for f in report.folds)


def test_report_json_round_trip(report):
    payload = json.loads(report.to_json())
    back = ExperimentReport.from_dict(payload)
    assert back.to_json() == report.to_json()
    assert "timings" not in payload
    assert payload["summary"]["excess_error"]["lisotron"]["mean"] >= 0


def test_report_tables(report):
    errors = report.table_csv("errors").splitlines()
    assert errors[0].split(",")[1:] == ["L-Iso", "Iso", "Mean", "Lin-R"]
    diffs = report.table_csv("differences").splitlines()
    assert diffs[1].split(",")[1] == "0.000 ± 0.000"
    rows = report.folds_csv().splitlines()
    assert len(rows) == 1 + 5 * 4


def test_self_difference_row():
    data = generate_synthetic_sim(10, 60, 0)
    rep = run_cv_experiment(data, ["lisotron"], make_folds(60, 3, 0), iteration_budget=5)
    assert rep.differences()["lisotron"] == {"mean": 0.0, "std": 0.0}
    assert rep.table_csv("differences").splitlines()[1] == f"{data.name},0.000 ± 0.000"


def test_cv_is_deterministic():
    data = generate_synthetic_sim(20, 100, 0)
    plan = make_folds(100, 4, 0)
    a = run_cv_experiment(data, ["lisotron", "sim"], plan, iteration_budget=10, seed=3)
    b = run_cv_experiment(data, ["lisotron", "sim"], plan, iteration_budget=10, seed=3)
    assert a.to_json() == b.to_json()


def test_cv_rejects_mismatched_plan():
    data = generate_synthetic_sim(10, 50, 0)
    with pytest.raises(InvalidInputError):
        run_cv_experiment(data, ["lisotron"], make_folds(40, 4, 0))


# -- plot data ---------------------------------------------------------------

def test_plot_data_round_trip(tmp_path):
    fn = MonotoneFn([0.0, 0.5, 2.0], [0.1, 0.4, 0.9])
    write_plot_data(fn, tmp_path / "u.txt")
    rows = read_plot_data(tmp_path / "u.txt")
    assert_allclose(rows, np.column_stack((fn.knots_z, fn.knots_v)), rtol=0, atol=0)
    assert check_lipschitz_rows(rows)
    assert not check_step_rows(rows)


def test_plot_checks_detect_violations():
    assert not check_lipschitz_rows(np.array([[0.0, 0.0], [1.0, 1.5]]))
    assert not check_lipschitz_rows(np.array([[0.0, 0.5], [1.0, 0.2]]))
    step = MonotoneFn([0.0, 1.0, 2.0], [0.1, 0.1, 0.8], "step").plot_rows()
    assert check_step_rows(step)
