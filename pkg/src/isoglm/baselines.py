"""Comparison methods: least squares, logistic regression and an
alternating single-index heuristic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .data import LabeledDataset
from .errors import InvalidInputError
from .hypothesis import LinearDirection
from .isotonic import MonotoneFn, build_monotone_fn, lpav

RIDGE_FALLBACK = 1e-8
MAX_HALVINGS = 20


@dataclass
class BaselineModel:
    kind: Literal["linear", "logistic", "sim-alternating"]
    direction: LinearDirection
    intercept: float = 0.0
    transfer: Optional[MonotoneFn] = None
    history: Optional[list[float]] = None

    def raw_scores(self, features) -> np.ndarray:
        return self.direction.project(features) + self.intercept

    def predict(self, features) -> np.ndarray:
        s = self.raw_scores(features)
        if self.kind == "linear":
            return np.clip(s, 0.0, 1.0)
        if self.kind == "logistic":
            return _sigmoid(s)
        return self.transfer(s)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "w": self.direction.w.tolist(), "intercept": self.intercept}
        if self.transfer is not None:
            out["transfer"] = self.transfer.to_dict()
        return out


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def fit_linear(data: LabeledDataset) -> BaselineModel:
    """Ordinary least squares with an intercept.

    Solved on centered data by SVD-based least squares; a rank-deficient
    design falls back to ridge with penalty ``1e-8``.
    """
    x, y = data.features, data.targets
    x_mean, y_mean = x.mean(axis=0), float(y.mean())
    xc, yc = x - x_mean, y - y_mean
    w, _, rank, _ = np.linalg.lstsq(xc, yc, rcond=None)
    if rank < x.shape[1]:
        gram = xc.T @ xc + RIDGE_FALLBACK * np.eye(x.shape[1])
        w = np.linalg.solve(gram, xc.T @ yc)
    return BaselineModel("linear", LinearDirection(w), float(y_mean - x_mean @ w))


def _cross_entropy(scores, y) -> float:
    # log(1 + e^s) - y s, computed stably.
    return float(np.mean(np.logaddexp(0.0, scores) - y * scores))


def fit_logistic(data: LabeledDataset, iterations: int = 500, step: float = 1.0,
                 tol: float = 1e-10) -> BaselineModel:
    """Logistic regression by full-batch gradient descent on mean cross-entropy.

    Targets in [0, 1] are treated as Bernoulli means. A step is accepted only
    if it lowers the loss; otherwise it is halved, up to 20 times. Stops early
    when the gradient norm drops below ``tol`` or no step is accepted.
    """
    if iterations < 1 or step <= 0.0:
        raise InvalidInputError("iterations and step must be positive")
    x = np.column_stack((data.features, np.ones(data.m)))
    y = data.targets
    theta = np.zeros(x.shape[1])
    loss = _cross_entropy(x @ theta, y)
    history = [loss]
    for _ in range(iterations):
        grad = x.T @ (_sigmoid(x @ theta) - y) / data.m
        if np.linalg.norm(grad) <= tol:
            break
        eta = step
        for _ in range(MAX_HALVINGS + 1):
            cand = theta - eta * grad
            cand_loss = _cross_entropy(x @ cand, y)
            if math.isfinite(cand_loss) and cand_loss < loss:
                break
            eta *= 0.5
        else:
            if not math.isfinite(cand_loss):
                raise FloatingPointError("logistic loss not finite after 20 step halvings")
            break
        theta, loss = cand, cand_loss
        history.append(loss)
    return BaselineModel("logistic", LinearDirection(theta[:-1]), float(theta[-1]), history=history)


def _sim_gradient(fn: MonotoneFn, x, y, w):
    z = x @ w
    r = fn(z) - y
    return 2.0 * (r * fn.derivative(z)) @ x / x.shape[0]


def _sim_transfer(z, y) -> MonotoneFn:
    fn = build_monotone_fn(lpav((z, y), 1.0), "linear")
    if fn.knots_z.size > 1:
        return fn
    # All projections tied: every 1-Lipschitz monotone function through the
    # single knot is optimal. Take the unit-slope one so w can move.
    z0, v0 = fn.knots_z[0], fn.knots_v[0]
    kz, kv = [z0 - v0, z0, z0 + 1.0 - v0], [0.0, v0, 1.0]
    keep = [0] + [i for i in (1, 2) if kz[i] > kz[i - 1]]
    return MonotoneFn([kz[i] for i in keep], [kv[i] for i in keep])


def fit_sim_alternating(data: LabeledDataset, outer_iterations: int = 50, inner_step: float = 1.0,
                        inner_iterations: int = 10) -> BaselineModel:
    """Alternate between refitting the transfer and descending on ``w``.

    Each outer round fits a 1-Lipschitz monotone transfer by LPAV on the
    current projections, then takes ``inner_iterations`` gradient steps on the
    squared loss with the transfer frozen (backtracking by halving). When all
    projections coincide (as at the start, ``w = 0``) the transfer is
    underdetermined and the unit-slope ramp through the fitted value is used,
    so the first round can leave ``w = 0``.
    """
    if outer_iterations < 1 or inner_iterations < 0 or inner_step <= 0.0:
        raise InvalidInputError("iteration counts and step must be positive")
    x, y = data.features, data.targets
    w = np.zeros(data.d)
    fn = None
    history = []
    for _ in range(outer_iterations):
        fn = _sim_transfer(x @ w, y)
        loss = float(np.mean((fn(x @ w) - y) ** 2))
        history.append(loss)
        for _ in range(inner_iterations):
            grad = _sim_gradient(fn, x, y, w)
            if not np.any(grad):
                break
            eta = inner_step
            for _ in range(MAX_HALVINGS + 1):
                cand = w - eta * grad
                cand_loss = float(np.mean((fn(x @ cand) - y) ** 2))
                if math.isfinite(cand_loss) and cand_loss < loss:
                    break
                eta *= 0.5
            else:
                break
            w, loss = cand, cand_loss
    # Final transfer matched to the final direction.
    fn = _sim_transfer(x @ w, y)
    history.append(float(np.mean((fn(x @ w) - y) ** 2)))
    return BaselineModel("sim-alternating", LinearDirection(w), 0.0, fn, history)
