import numpy as np
import pytest
from numpy.testing import assert_allclose

from isoglm.baselines import fit_linear, fit_logistic, fit_sim_alternating
from isoglm.data import LabeledDataset, generate_synthetic_sim, make_folds
from isoglm.evaluation import empirical_sq_error, run_cv_experiment
from isoglm.learners import lisotron_fit


def _design(x):
    return np.column_stack((x, np.ones(len(x))))


def test_linear_exact_fit():
    x = np.random.default_rng(0).random((20, 2))
    y = 0.5 * x[:, 0] + 0.1
    model = fit_linear(LabeledDataset(x, y))
    assert_allclose(model.direction.w, [0.5, 0.0], atol=1e-12)
    assert model.intercept == pytest.approx(0.1)
    assert empirical_sq_error(model, LabeledDataset(x, y)) <= 1e-24


def test_linear_constant_targets():
    x = np.random.default_rng(0).random((15, 3))
    model = fit_linear(LabeledDataset(x, np.full(15, 0.3)))
    assert_allclose(model.direction.w, 0.0, atol=1e-15)
    assert model.intercept == pytest.approx(0.3)


def test_linear_matches_normal_equations():
    rng = np.random.default_rng(42)
    x, y = rng.normal(size=(50, 3)), rng.random(50)
    model = fit_linear(LabeledDataset(x, y))
    a = _design(x)
    coef = np.linalg.solve(a.T @ a, a.T @ y)
    r_ours = y - model.raw_scores(x)
    r_oracle = y - a @ coef
    assert abs(r_ours @ r_ours - r_oracle @ r_oracle) <= 1e-8
    # Residual orthogonal to every column and the intercept.
    assert np.abs(a.T @ r_ours).max() <= 1e-6


def test_linear_rank_deficient_uses_ridge():
    x = np.random.default_rng(1).random((30, 2))
    x = np.column_stack((x, x[:, 0]))
    y = 0.2 + 0.3 * x[:, 1]
    model = fit_linear(LabeledDataset(x, y))
    assert np.all(np.isfinite(model.direction.w))
    assert_allclose(model.raw_scores(x), y, atol=1e-6)


def test_linear_predictions_clamped():
    x = np.array([[0.0], [1.0]])
    model = fit_linear(LabeledDataset(x, [0.0, 1.0]))
    assert_allclose(model.predict([[-3.0], [3.0]]), [0.0, 1.0])


def test_logistic_half_targets_stationary_at_zero():
    x = np.random.default_rng(2).normal(size=(40, 2))
    x -= x.mean(axis=0)
    model = fit_logistic(LabeledDataset(x, np.full(40, 0.5)))
    assert abs(model.intercept) <= 1e-6
    assert_allclose(model.direction.w, 0.0, atol=1e-6)


def test_logistic_all_ones_monotone_progress():
    x = np.random.default_rng(3).normal(size=(30, 2)) / 3
    model = fit_logistic(LabeledDataset(x, np.ones(30)), iterations=100)
    assert all(b < a for a, b in zip(model.history, model.history[1:]))
    assert model.predict(x).min() > 0.9


def test_logistic_gradient_small_at_solution():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 3)) / 2
    p = 1 / (1 + np.exp(-(x @ [2.0, -1.0, 0.5] + 0.3)))
    y = (rng.random(300) < p).astype(float)
    model = fit_logistic(LabeledDataset(x, y))
    grad = _design(x).T @ (model.predict(x) - y) / len(y)
    assert np.linalg.norm(grad) <= 1e-4


def test_logistic_loss_non_increasing():
    data = generate_synthetic_sim(10, 200, 0)
    model = fit_logistic(data, iterations=200)
    assert all(b <= a for a, b in zip(model.history, model.history[1:]))
    p = model.predict(data.features)
    assert np.all((p > 0) & (p < 1))


def test_sim_first_round_matches_lisotron_direction():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(60, 3)) / 3
    y = rng.random(60)
    data = LabeledDataset(x, y)
    sim = fit_sim_alternating(data, outer_iterations=1, inner_iterations=1, inner_step=1.0)
    liso = lisotron_fit(data, 2).hypotheses[1].direction.w
    cos = sim.direction.w @ liso / (np.linalg.norm(sim.direction.w) * np.linalg.norm(liso))
    assert cos == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(sim.direction.w) > 0


def test_sim_one_dimensional_realizable():
    x = np.linspace(0, 1, 101)[:, None]
    data = LabeledDataset(x, x[:, 0])
    model = fit_sim_alternating(data, outer_iterations=50)
    assert empirical_sq_error(model, data) <= 1e-3


def test_sim_training_error_non_increasing():
    data = generate_synthetic_sim(20, 200, 6)
    model = fit_sim_alternating(data, outer_iterations=15)
    hist = model.history
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_sim_close_to_lisotron_on_synthetic():
    data = generate_synthetic_sim(400, 600, 0)
    report = run_cv_experiment(data, ["lisotron", "sim"], make_folds(600, 10, 1))
    summary = report.summary()
    assert abs(summary["sim"]["mean"] - summary["lisotron"]["mean"]) <= 0.1
