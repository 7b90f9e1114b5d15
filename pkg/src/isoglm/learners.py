"""Perceptron-style learners for GLMs and single index models.

All three start from ``w = 0`` and repeat

    w <- w + mean_i (y_i - u(w . x_i)) x_i

with ``u`` either given (GLM-tron), refit each round by Lipschitz isotonic
regression (L-Isotron) or by plain isotonic regression (Isotron). Each call
returns the whole sequence of hypotheses; choose among them with
:func:`isoglm.evaluation.holdout_select`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LabeledDataset, Seed, make_rng
from .errors import InvalidInputError
from .hypothesis import Hypothesis, LinearDirection, TransferSpec
from .isotonic import FEASIBILITY_TOL, RegressionInstance, build_monotone_fn, lpav, pav

MAX_DEFAULT_ITERATIONS = 500


@dataclass
class TrainingTrace:
    hypotheses: list[Hypothesis] = field(default_factory=list)
    train_errors: list[float] = field(default_factory=list)

    @property
    def iteration_count(self) -> int:
        return len(self.hypotheses)

    def __len__(self) -> int:
        return len(self.hypotheses)

    @property
    def iterates(self) -> list[tuple[Hypothesis, float]]:
        return list(zip(self.hypotheses, self.train_errors))

    def best_train_index(self) -> int:
        return int(np.argmin(self.train_errors))


def default_iterations(m: int) -> int:
    """``ceil(2 sqrt(m))`` capped at 500."""
    return min(MAX_DEFAULT_ITERATIONS, max(1, math.ceil(2.0 * math.sqrt(m))))


def _check(data: LabeledDataset, iterations: int) -> None:
    if not isinstance(iterations, (int, np.integer)) or iterations < 1:
        raise InvalidInputError(f"iterations must be a positive integer, got {iterations!r}")
    if data.m == 0:
        raise InvalidInputError("dataset is empty")


def _update(w, x, residual):
    return w + residual @ x / x.shape[0]


def glmtron_fit(data: LabeledDataset, transfer: TransferSpec, iterations: int) -> TrainingTrace:
    """GLM-tron with a known transfer function."""
    _check(data, iterations)
    if not transfer.is_known:
        raise InvalidInputError("glmtron_fit needs a known analytic transfer")
    x, y = data.features, data.targets
    w = np.zeros(data.d)
    trace = TrainingTrace()
    for _ in range(iterations):
        pred = transfer(x @ w)
        residual = y - pred
        trace.hypotheses.append(Hypothesis(LinearDirection(w.copy()), transfer))
        trace.train_errors.append(float(np.mean(residual * residual)))
        w = _update(w, x, residual)
    return trace


def _isotonic_loop(data, iterations, lipschitz, max_fit_points, seed, validate):
    _check(data, iterations)
    x, y = data.features, data.targets
    m = data.m
    subsample = max_fit_points is not None and max_fit_points < m
    rng = make_rng(seed) if subsample else None
    w = np.zeros(data.d)
    trace = TrainingTrace()
    for _ in range(iterations):
        z = x @ w
        if subsample:
            rows = np.sort(rng.choice(m, size=max_fit_points, replace=False))
            fit_inst = RegressionInstance(z[rows], y[rows])
        else:
            fit_inst = RegressionInstance(z, y)
        if lipschitz:
            fit = lpav(fit_inst, 1.0)
            fn = build_monotone_fn(fit, "linear")
            if validate and fn.max_slope() > 1.0 + FEASIBILITY_TOL:
                raise AssertionError(f"fitted transfer has slope {fn.max_slope()} > 1")
        else:
            fit = pav(fit_inst)
            fn = build_monotone_fn(fit, "step")
        pred = fit.in_input_order() if not subsample else fn(z)
        residual = y - pred
        trace.hypotheses.append(Hypothesis(LinearDirection(w.copy()), TransferSpec.from_fn(fn)))
        trace.train_errors.append(float(np.mean(residual * residual)))
        w = _update(w, x, residual)
    return trace


def lisotron_fit(data: LabeledDataset, iterations: int, *, max_fit_points: Optional[int] = None,
                 seed: Seed = 0, validate: bool = False) -> TrainingTrace:
    """L-Isotron: refit a 1-Lipschitz monotone transfer by LPAV each round.

    Args:
        data: training sample.
        iterations: number of hypotheses to produce.
        max_fit_points: if set, each LPAV fit uses a random subsample of this
            many points (drawn from ``seed``); off by default.
        validate: re-check the Lipschitz bound of every fitted transfer.
    """
    return _isotonic_loop(data, iterations, True, max_fit_points, seed, validate)


def isotron_fit(data: LabeledDataset, iterations: int, *, max_fit_points: Optional[int] = None,
                seed: Seed = 0) -> TrainingTrace:
    """Isotron reusing the same sample every round; transfers are PAV step functions."""
    return _isotonic_loop(data, iterations, False, max_fit_points, seed, False)
