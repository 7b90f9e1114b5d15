"""Error metrics, hold-out iterate selection and cross-validated experiments."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .baselines import fit_linear, fit_logistic, fit_sim_alternating
from .data import FoldPlan, LabeledDataset, make_rng
from .errors import InvalidInputError
from .hypothesis import Hypothesis, TransferSpec
from .isotonic import MonotoneFn
from .learners import TrainingTrace, default_iterations, glmtron_fit, isotron_fit, lisotron_fit

logger = logging.getLogger(__name__)

# Stream ids for seed derivation; one independent stream per purpose.
STREAM_HOLDOUT = 1


class Predictor(Protocol):
    def predict(self, features: np.ndarray) -> np.ndarray: ...


@dataclass
class ConstantModel:
    value: float

    def predict(self, features) -> np.ndarray:
        return np.full(np.shape(features)[0], self.value)

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass
class ErrorReport:
    mse: float
    normalized_mse: float
    excess_error: Optional[float] = None


def empirical_sq_error(model: Predictor, data: LabeledDataset) -> float:
    """Mean squared error of ``model`` on ``data``."""
    r = model.predict(data.features) - data.targets
    return float(np.mean(r * r))


def empirical_excess_error(model: Predictor, data: LabeledDataset) -> float:
    """Mean squared distance to the true conditional mean (needs ground truth)."""
    r = model.predict(data.features) - data.conditional_means()
    return float(np.mean(r * r))


def error_report(model: Predictor, data: LabeledDataset) -> ErrorReport:
    mse = empirical_sq_error(model, data)
    var = float(np.var(data.targets))
    if var == 0.0:
        raise InvalidInputError(f"targets of {data.name} have zero variance; cannot normalize")
    excess = empirical_excess_error(model, data) if data.ground_truth is not None else None
    return ErrorReport(mse, mse / var, excess)


def holdout_select(trace: TrainingTrace, holdout: LabeledDataset) -> tuple[Hypothesis, int]:
    """Iterate with the lowest hold-out squared error (earliest on ties)."""
    if len(trace) == 0:
        raise InvalidInputError("trace is empty")
    if holdout.m == 0:
        raise InvalidInputError("holdout set is empty")
    errors = [empirical_sq_error(h, holdout) for h in trace.hypotheses]
    idx = int(np.argmin(errors))
    return trace.hypotheses[idx], idx


def _glmtron(transfer_name: str):
    transfer = TransferSpec.known(transfer_name)
    return lambda data, iterations: glmtron_fit(data, transfer, iterations)


TRACE_LEARNERS: dict[str, Callable[[LabeledDataset, int], TrainingTrace]] = {
    "lisotron": lisotron_fit,
    "isotron": isotron_fit,
    "glmtron": _glmtron("sigmoid-rescaled"),
}

DIRECT_LEARNERS: dict[str, Callable[[LabeledDataset], Predictor]] = {
    "linear": fit_linear,
    "logistic": fit_logistic,
    "sim": fit_sim_alternating,
    "mean": lambda data: ConstantModel(float(np.mean(data.targets))),
}

LABELS = {
    "lisotron": "L-Iso", "glmtron": "GLM-t", "isotron": "Iso",
    "linear": "Lin-R", "logistic": "Log-R", "sim": "SIM", "mean": "Mean",
}


def resolve_algorithm(name: str):
    """Return ``(is_trace_learner, fitter)`` for an algorithm name.

    ``glmtron:<transfer>`` selects GLM-tron with another known transfer.
    """
    if name in TRACE_LEARNERS:
        return True, TRACE_LEARNERS[name]
    if name.startswith("glmtron:"):
        return True, _glmtron(name.split(":", 1)[1])
    if name in DIRECT_LEARNERS:
        return False, DIRECT_LEARNERS[name]
    known = sorted(TRACE_LEARNERS) + sorted(DIRECT_LEARNERS) + ["glmtron:<transfer>"]
    raise InvalidInputError(f"unknown algorithm {name!r}; choose from {known}")


def label(name: str) -> str:
    if name.startswith("glmtron:"):
        return f"GLM-t({name.split(':', 1)[1]})"
    return LABELS.get(name, name)


def split_holdout(rows: np.ndarray, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Split ``rows`` into (fit rows, hold-out rows), both sorted."""
    if not 0.0 < fraction <= 0.5:
        raise InvalidInputError("holdout_fraction must lie in (0, 0.5]")
    n_hold = max(1, int(round(fraction * rows.size)))
    if n_hold >= rows.size:
        raise InvalidInputError(f"{rows.size} rows are too few for a hold-out split")
    perm = make_rng(seed).permutation(rows.size)
    return np.sort(rows[perm[n_hold:]]), np.sort(rows[perm[:n_hold]])


def fit_with_selection(name: str, train: LabeledDataset, iterations: Optional[int],
                       holdout_fraction: float, seed) -> tuple[Predictor, Optional[int], int]:
    """Fit one algorithm; trace learners use a seeded inner hold-out split.

    Returns ``(model, selected_iteration, iterations_used)``.
    """
    is_trace, fitter = resolve_algorithm(name)
    if not is_trace:
        return fitter(train), None, 0
    fit_rows, hold_rows = split_holdout(np.arange(train.m), holdout_fraction, seed)
    fit_part = train.subset(fit_rows)
    budget = iterations if iterations is not None else default_iterations(fit_part.m)
    trace = fitter(fit_part, budget)
    model, idx = holdout_select(trace, train.subset(hold_rows))
    return model, idx, budget


@dataclass
class FoldResult:
    repeat: int
    fold: int
    train_size: int
    test_size: int
    errors: dict[str, ErrorReport]
    selected_iteration: dict[str, Optional[int]]
    iterations: dict[str, int]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


@dataclass
class ExperimentReport:
    """Per-fold error reports for several algorithms plus their summaries.

    ``summary`` and ``differences`` are recomputed from ``folds`` on demand;
    the standard deviation across folds uses ``ddof=1``. ``timings`` are kept
    out of :meth:`to_dict` so reports from identical runs are identical.
    """

    dataset: str
    algorithms: list[str]
    reference: str
    folds: list[FoldResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def values(self, algorithm: str, metric: str = "normalized_mse") -> list[float]:
        return [getattr(f.errors[algorithm], metric) for f in self.folds]

    def summary(self, metric: str = "normalized_mse") -> dict[str, dict[str, float]]:
        out = {}
        for alg in self.algorithms:
            vals = self.values(alg, metric)
            if any(v is None for v in vals):
                continue
            mean, std = _mean_std(vals)
            out[alg] = {"mean": mean, "std": std}
        return out

    def differences(self, metric: str = "normalized_mse") -> dict[str, dict[str, float]]:
        """Per-fold ``algorithm - reference`` differences, summarized."""
        ref = np.asarray(self.values(self.reference, metric))
        out = {}
        for alg in self.algorithms:
            mean, std = _mean_std(np.asarray(self.values(alg, metric)) - ref)
            out[alg] = {"mean": mean, "std": std}
        return out

    def to_dict(self) -> dict:
        payload = {
            "dataset": self.dataset,
            "algorithms": list(self.algorithms),
            "reference": self.reference,
            "config": self.config,
            "summary": {"normalized_mse": self.summary(), "mse": self.summary("mse")},
            "differences": self.differences(),
            "folds": [asdict(f) for f in self.folds],
        }
        excess = self.summary("excess_error")
        if excess:
            payload["summary"]["excess_error"] = excess
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentReport":
        folds = []
        for f in payload["folds"]:
            f = dict(f)
            f["errors"] = {k: ErrorReport(**v) for k, v in f["errors"].items()}
            folds.append(FoldResult(**f))
        return cls(payload["dataset"], payload["algorithms"], payload["reference"], folds,
                   payload.get("config", {}))

    def folds_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["repeat", "fold", "algorithm", "mse", "normalized_mse",
                         "excess_error", "selected_iteration", "iterations"])
        for f in self.folds:
            for alg in self.algorithms:
                e = f.errors[alg]
                writer.writerow([f.repeat, f.fold, alg, repr(e.mse), repr(e.normalized_mse),
                                 "" if e.excess_error is None else repr(e.excess_error),
                                 "" if f.selected_iteration[alg] is None else f.selected_iteration[alg],
                                 f.iterations[alg]])
        return buf.getvalue()

    def table_csv(self, which: str = "errors", digits: int = 3) -> str:
        """One-row table: ``"errors"`` gives normalized MSE per algorithm,
        ``"differences"`` gives the difference from the reference algorithm
        (the reference's own column reads 0 ± 0)."""
        if which not in ("errors", "differences"):
            raise InvalidInputError(f"unknown table {which!r}")
        stats = self.summary() if which == "errors" else self.differences()
        algs = self.algorithms
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dataset"] + [label(a) for a in algs])
        writer.writerow([self.dataset] + [
            f"{stats[a]['mean']:.{digits}f} ± {stats[a]['std']:.{digits}f}" for a in algs])
        return buf.getvalue()


def merge_reports(reports: Sequence[ExperimentReport], config: Optional[dict] = None) -> ExperimentReport:
    """Pool the folds of several runs (e.g. repeats) into one report."""
    if not reports:
        raise InvalidInputError("nothing to merge")
    first = reports[0]
    merged = ExperimentReport(first.dataset, list(first.algorithms), first.reference,
                              [f for r in reports for f in r.folds],
                              config if config is not None else dict(first.config))
    for r in reports:
        for k, v in r.timings.items():
            merged.timings[k] = merged.timings.get(k, 0.0) + v
    return merged


def run_cv_experiment(
    data: LabeledDataset,
    algorithms: Sequence[str],
    fold_plan: FoldPlan,
    iteration_budget: Optional[int] = None,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    repeat: int = 0,
    reference: Optional[str] = None,
) -> ExperimentReport:
    """K-fold cross-validation of several algorithms on one dataset.

    For each fold the remaining rows form the training split. Trace learners
    fit on the training split minus a seeded hold-out part and keep the
    iterate with the lowest hold-out error; other algorithms fit on the whole
    training split. All models are scored on the test fold.

    Args:
        iteration_budget: iterations for trace learners; ``None`` uses
            ``ceil(2 sqrt(m_fit))`` capped at 500.
        seed: root of the hold-out split streams (one per fold).
        repeat: label copied into every fold result.
        reference: algorithm differences are measured against; defaults to
            the first algorithm.
    """
    algorithms = list(algorithms)
    if not algorithms:
        raise InvalidInputError("no algorithms given")
    for name in algorithms:
        resolve_algorithm(name)
    if fold_plan.assignments.size != data.m:
        raise InvalidInputError("fold plan does not match dataset size")
    if iteration_budget is not None and iteration_budget < 1:
        raise InvalidInputError("iteration_budget must be positive")
    reference = reference or algorithms[0]
    report = ExperimentReport(data.name, algorithms, reference, config={
        "iteration_budget": iteration_budget, "holdout_fraction": holdout_fraction,
        "seed": seed, "fold_count": fold_plan.fold_count, "fold_seed": fold_plan.seed,
    })
    timings = {a: 0.0 for a in algorithms}
    for fold in range(fold_plan.fold_count):
        train = data.subset(fold_plan.train_rows(fold))
        test = data.subset(fold_plan.test_rows(fold))
        holdout_seed = np.random.SeedSequence(seed, spawn_key=(STREAM_HOLDOUT, repeat, fold))
        errors, selected, iters = {}, {}, {}
        for name in algorithms:
            start = time.perf_counter()
            model, idx, used = fit_with_selection(name, train, iteration_budget,
                                                  holdout_fraction, holdout_seed)
            timings[name] += time.perf_counter() - start
            errors[name] = error_report(model, test)
            selected[name] = idx
            iters[name] = used
        report.folds.append(FoldResult(repeat, fold, train.m, test.m, errors, selected, iters))
        logger.info("fold %d/%d done", fold + 1, fold_plan.fold_count)
    report.timings = timings
    return report


def write_plot_data(fn: MonotoneFn, path, header: str = "z u(z)") -> None:
    """Write the ``(z, u(z))`` polyline of a transfer as two whitespace-separated columns."""
    np.savetxt(path, fn.plot_rows(), fmt="%.17g", header=header)


def read_plot_data(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path))


def check_lipschitz_rows(rows: np.ndarray, bound: float = 1.0, tol: float = 1e-9) -> bool:
    """True when a polyline is non-decreasing with slopes at most ``bound``."""
    dz, dv = np.diff(rows[:, 0]), np.diff(rows[:, 1])
    return bool(np.all(dz > 0) and np.all(dv >= -tol) and np.all(dv <= bound * dz + tol))


def check_step_rows(rows: np.ndarray, tol: float = 0.0) -> bool:
    """True when every polyline segment is flat or a vertical, upward jump."""
    dz, dv = np.diff(rows[:, 0]), np.diff(rows[:, 1])
    flat = np.abs(dv) <= tol
    jump = (np.abs(dz) <= tol) & (dv >= 0)
    return bool(np.all(dz >= 0) and np.all(flat | jump))
