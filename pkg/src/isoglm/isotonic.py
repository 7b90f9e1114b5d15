"""One-dimensional monotone least squares: PAV, Lipschitz-bounded PAV (LPAV)
and the piecewise-linear / piecewise-constant functions built from their fits.

All solvers work on the unnormalized weighted objective
``sum_i w_i (yhat_i - y_i) ** 2``; the 1/m factor does not move the minimizer.
Points sharing an abscissa are pooled into one weighted point before solving,
since any function of ``z`` must assign them the same value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, OracleError

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-6

Interpolation = Literal["linear", "step"]


@dataclass
class RegressionInstance:
    """Points ``(z_i, y_i)`` with optional positive weights.

    Construction validates the data and stores it sorted by ``z`` (stable),
    with ``order`` mapping sorted positions back to the caller's indices.
    """

    z: np.ndarray
    y: np.ndarray
    weights: Optional[np.ndarray] = None
    order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if z.size == 0:
            raise InvalidInputError("regression instance is empty")
        if z.shape != y.shape:
            raise InvalidInputError(
                f"z and y lengths differ ({z.size} != {y.size})")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            raise InvalidInputError("z and y must be finite")
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise InvalidInputError("targets must lie in [0, 1]")
        if self.weights is None:
            w = np.ones_like(z)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != z.shape:
                raise InvalidInputError("weights must match z in length")
            if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
                raise InvalidInputError("weights must be finite and positive")
        order = np.argsort(z, kind="stable")
        self.z = z[order]
        self.y = y[order]
        self.weights = w[order]
        self.order = order

    def __len__(self) -> int:
        return self.z.size


@dataclass
class IsotonicFit:
    """Fitted values for a sorted instance.

    ``lipschitz_bound`` is ``None`` for plain PAV fits.
    """

    z: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    yhat: np.ndarray
    lipschitz_bound: Optional[float] = None
    order: Optional[np.ndarray] = None

    def objective(self) -> float:
        """Weighted residual sum of squares (unnormalized)."""
        r = self.yhat - self.y
        return float(np.sum(self.weights * r * r))

    def in_input_order(self) -> np.ndarray:
        """Fitted values rearranged to the order the data was supplied in."""
        if self.order is None:
            return self.yhat.copy()
        out = np.empty_like(self.yhat)
        out[self.order] = self.yhat
        return out

    def max_violation(self) -> float:
        """Largest violation of the monotone and Lipschitz constraints."""
        if self.yhat.size < 2:
            return 0.0
        dy = np.diff(self.yhat)
        worst = float(np.max(-dy, initial=0.0))
        if self.lipschitz_bound is not None and math.isfinite(self.lipschitz_bound):
            worst = max(worst, float(np.max(dy - self.lipschitz_bound * np.diff(self.z))))
        return max(worst, 0.0)


def _as_instance(instance) -> RegressionInstance:
    if isinstance(instance, RegressionInstance):
        return instance
    z, y = instance
    return RegressionInstance(z, y)


def _pool_ties(z, y, w):
    """Merge points with equal ``z`` (input sorted). Returns the pooled arrays
    and, for every input point, the index of its pooled point."""
    new_group = np.empty(z.size, dtype=bool)
    new_group[0] = True
    np.not_equal(z[1:], z[:-1], out=new_group[1:])
    group = np.cumsum(new_group) - 1
    starts = np.flatnonzero(new_group)
    wsum = np.add.reduceat(w, starts)
    ymean = np.add.reduceat(w * y, starts) / wsum
    return z[starts], ymean, wsum, group


def _pav_sorted(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Block stack: (weighted sum, total weight, count).
    sums: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        s, c, k = yi * wi, wi, 1
        while sums and sums[-1] / wts[-1] >= s / c:
            s += sums.pop()
            c += wts.pop()
            k += counts.pop()
        sums.append(s)
        wts.append(c)
        counts.append(k)
    return np.repeat(np.array(sums) / np.array(wts), counts)


def pav(instance) -> IsotonicFit:
    """Weighted least-squares non-decreasing fit by pool adjacent violators.

    Args:
        instance: a :class:`RegressionInstance` or a ``(z, y)`` pair.

    Returns:
        The unique minimizer of ``sum w_i (yhat_i - y_i)^2`` subject to
        ``yhat`` being non-decreasing in ``z`` (tied ``z`` share a value).
    """
    inst = _as_instance(instance)
    zu, yu, wu, group = _pool_ties(inst.z, inst.y, inst.weights)
    fitted = _pav_sorted(yu, wu)
    return IsotonicFit(inst.z, inst.y, inst.weights, fitted[group], None, inst.order)


def _derivative_root(t, v, slope_left, slope_right) -> float:
    # v is the (non-decreasing) derivative sampled at knots t.
    idx = int(np.searchsorted(v, 0.0, side="left"))
    if idx == 0:
        return float(t[0] - v[0] / slope_left)
    if idx == v.size:
        return float(t[-1] - v[-1] / slope_right)
    t0, t1, v0, v1 = t[idx - 1], t[idx], v[idx - 1], v[idx]
    return float(t0 - v0 * (t1 - t0) / (v1 - v0))


def _lpav_pooled(z: np.ndarray, y: np.ndarray, w: np.ndarray, bound: float) -> np.ndarray:
    """Exact solver for distinct, sorted ``z``.

    Forward pass: the cost-to-come ``F_k(theta)`` (best cost of points
    ``1..k`` given ``yhat_k = theta``) is convex piecewise quadratic, so its
    derivative is continuous piecewise linear and is stored as knot samples
    plus the two tail slopes. Moving to the next point replaces ``F_k`` by its
    minimum over ``[theta - bound * gap, theta]``: the derivative is cut at its
    root, a zero segment of length ``bound * gap`` is inserted, and the right
    part is shifted. Backward pass clips each stored minimizer to the window
    allowed by its successor.
    """
    n = z.size
    if n == 1:
        return y.copy()
    shifts = bound * np.diff(z)
    t = np.array([y[0]])
    v = np.array([0.0])
    slope_left = slope_right = 2.0 * w[0]
    minimizers = np.empty(n)
    zero = np.zeros(1)
    for k in range(n - 1):
        theta = _derivative_root(t, v, slope_left, slope_right)
        minimizers[k] = theta
        lo = int(np.searchsorted(t, theta, side="left"))
        hi = int(np.searchsorted(t, theta, side="right"))
        shift = shifts[k]
        if math.isinf(shift):
            t = np.concatenate((t[:lo], [theta]))
            v = np.concatenate((np.minimum(v[:lo], 0.0), zero))
            slope_right = 0.0
        elif shift == 0.0:
            t = np.concatenate((t[:lo], [theta], t[hi:]))
            v = np.concatenate((np.minimum(v[:lo], 0.0), zero, np.maximum(v[hi:], 0.0)))
        else:
            t = np.concatenate((t[:lo], [theta, theta + shift], t[hi:] + shift))
            v = np.concatenate(
                (np.minimum(v[:lo], 0.0), zero, zero, np.maximum(v[hi:], 0.0)))
        a = 2.0 * w[k + 1]
        v = v + a * (t - y[k + 1])
        slope_left += a
        slope_right += a
    out = np.empty(n)
    out[-1] = _derivative_root(t, v, slope_left, slope_right)
    for k in range(n - 2, -1, -1):
        nxt = out[k + 1]
        out[k] = min(max(minimizers[k], nxt - shifts[k]), nxt)
    return out


def lpav(instance, lipschitz_bound: float = 1.0) -> IsotonicFit:
    """Least-squares fit that is non-decreasing with slope at most ``lipschitz_bound``.

    Solves ``min sum w_i (yhat_i - y_i)^2`` subject to
    ``0 <= yhat_{i+1} - yhat_i <= L * (z_{i+1} - z_i)`` exactly, in O(m^2)
    after sorting. ``lipschitz_bound=math.inf`` reduces to PAV.
    """
    inst = _as_instance(instance)
    bound = float(lipschitz_bound)
    if math.isnan(bound) or bound < 0.0:
        raise InvalidInputError("lipschitz_bound must be >= 0")
    zu, yu, wu, group = _pool_ties(inst.z, inst.y, inst.weights)
    fitted = _lpav_pooled(zu, yu, wu, bound)
    # Solution stays inside [min y, max y]; clip away rounding only.
    np.clip(fitted, yu.min(), yu.max(), out=fitted)
    return IsotonicFit(inst.z, inst.y, inst.weights, fitted[group], bound, inst.order)


def lpav_reference_oracle(
    instance,
    lipschitz_bound: float = 1.0,
    max_iter: int = 200_000,
    tol: float = 1e-11,
) -> IsotonicFit:
    """Slow reference solver for the LPAV problem, for validating :func:`lpav`.

    Writes ``yhat = c + cumsum(d)`` with box constraints
    ``0 <= d_j <= L * (z_{j+1} - z_j)``, eliminates the free offset ``c`` in
    closed form, and runs accelerated projected gradient on the resulting
    box-constrained least squares. Tied abscissae are handled by zero-width
    boxes, not by pooling. A final active-set polish solves the free
    variables exactly and is kept only if it satisfies KKT; otherwise the
    iteration runs until the gradient mapping falls below ``tol``.

    Raises:
        OracleError: if the gradient mapping has not fallen below ``tol``
            after ``max_iter`` iterations.
    """
    inst = _as_instance(instance)
    z, y, w = inst.z, inst.y, inst.weights
    n = z.size
    if n == 1:
        return IsotonicFit(z, y, w, y.copy(), lipschitz_bound, inst.order)
    upper = lipschitz_bound * np.diff(z)
    lower = np.zeros(n - 1)

    steps = np.tril(np.ones((n, n - 1)), -1)
    sw = np.sqrt(w)
    centering = np.eye(n) - np.outer(np.ones(n), w) / w.sum()
    B = sw[:, None] * (centering @ steps)
    b = sw * (centering @ y)
    lip = 2.0 * np.linalg.norm(B, 2) ** 2

    def grad(d):
        return 2.0 * B.T @ (B @ d - b)

    def objective(d):
        r = B @ d - b
        return float(r @ r)

    d = np.clip(np.zeros(n - 1), lower, upper)
    momentum_point, d_prev, theta = d.copy(), d.copy(), 1.0
    certified = False
    for it in range(max_iter):
        d = np.clip(momentum_point - grad(momentum_point) / lip, lower, upper)
        residual = np.linalg.norm(d - np.clip(d - grad(d) / lip, lower, upper))
        if residual < tol:
            break
        if residual < 1e-5 and it % 25 == 0:
            polished, certified = _polish(B, b, d, lower, upper)
            if certified:
                d = polished
                break
        # Gradient-based adaptive restart.
        if np.dot(momentum_point - d, d - d_prev) > 0.0:
            theta = 1.0
            momentum_point, d_prev = d.copy(), d
            continue
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        momentum_point = d + ((theta - 1.0) / theta_next) * (d - d_prev)
        d_prev, theta = d, theta_next
    else:
        raise OracleError(f"projected gradient did not converge in {max_iter} iterations")

    if not certified:
        polished, certified = _polish(B, b, d, lower, upper)
        if certified:
            d = polished
    c = float(np.sum(w * (y - steps @ d)) / w.sum())
    yhat = c + steps @ d
    return IsotonicFit(z, y, w, yhat, lipschitz_bound, inst.order)


def _polish(B, b, d, lower, upper, eps=1e-9):
    at_lo = d <= lower + eps
    at_hi = (d >= upper - eps) & ~at_lo
    free = ~(at_lo | at_hi)
    fixed = np.where(at_lo, lower, upper)
    cand = d.copy()
    cand[~free] = fixed[~free]
    if free.any():
        rhs = b - B[:, ~free] @ cand[~free]
        cand[free] = np.linalg.lstsq(B[:, free], rhs, rcond=None)[0]
    if np.any(cand < lower - eps) or np.any(cand > upper + eps):
        return d, False
    g = 2.0 * B.T @ (B @ cand - b)
    kkt_tol = 1e-9
    if np.any(g[at_lo] < -kkt_tol) or np.any(g[at_hi] > kkt_tol) or np.any(np.abs(g[free]) > kkt_tol):
        return d, False
    return np.clip(cand, lower, upper), True


class MonotoneFn:
    """Non-decreasing function of one variable defined by sorted knots.

    ``interpolation="linear"`` joins knots by straight segments;
    ``"step"`` holds each knot's value up to the midpoints with its
    neighbours. Outside the knot range both extend constantly.
    """

    def __init__(self, knots_z: Sequence[float], knots_v: Sequence[float],
                 interpolation: Interpolation = "linear"):
        kz = np.asarray(knots_z, dtype=float).ravel()
        kv = np.asarray(knots_v, dtype=float).ravel()
        if kz.size == 0 or kz.shape != kv.shape:
            raise InvalidInputError("knots must be nonempty and of equal length")
        if np.any(np.diff(kz) <= 0.0):
            raise InvalidInputError("knot abscissae must be strictly increasing")
        if np.any(np.diff(kv) < -FEASIBILITY_TOL):
            raise InvalidInputError("knot values must be non-decreasing")
        if interpolation not in ("linear", "step"):
            raise InvalidInputError(f"unknown interpolation {interpolation!r}")
        self.knots_z = kz
        self.knots_v = kv
        self.interpolation = interpolation
        self._mids = 0.5 * (kz[1:] + kz[:-1])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.interpolation == "linear":
            return np.interp(t, self.knots_z, self.knots_v)
        return self.knots_v[np.searchsorted(self._mids, t, side="right")]

    def __repr__(self) -> str:
        return (f"MonotoneFn({self.knots_z.size} knots, {self.interpolation}, "
                f"range=[{self.knots_v[0]:.4g}, {self.knots_v[-1]:.4g}])")

    def segment_slopes(self) -> np.ndarray:
        if self.knots_z.size < 2:
            return np.zeros(0)
        return np.diff(self.knots_v) / np.diff(self.knots_z)

    def max_slope(self) -> float:
        """Largest slope between consecutive knots (linear interpolation)."""
        slopes = self.segment_slopes()
        return float(slopes.max()) if slopes.size else 0.0

    def derivative(self, t) -> np.ndarray:
        """Derivative of the linear interpolant.

        At an interior knot the slope of the segment to its left is used; the
        first knot takes the first segment's slope. Outside the knot range,
        and everywhere for step functions, the derivative is zero.
        """
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        slopes = self.segment_slopes()
        if self.interpolation == "step" or slopes.size == 0:
            return out
        inside = (t >= self.knots_z[0]) & (t <= self.knots_z[-1])
        seg = np.searchsorted(self.knots_z, t[inside], side="left") - 1
        out[inside] = slopes[np.clip(seg, 0, slopes.size - 1)]
        return out

    def plot_rows(self) -> np.ndarray:
        """Two-column ``(z, u(z))`` polyline tracing the function over its knots.

        Step functions are emitted with both corners of every jump, so each
        consecutive pair of rows is either horizontal or vertical.
        """
        if self.interpolation == "linear":
            return np.column_stack((self.knots_z, self.knots_v))
        edges = np.concatenate(([self.knots_z[0]], self._mids, [self.knots_z[-1]]))
        zs = np.repeat(edges, 2)[1:-1]
        vs = np.repeat(self.knots_v, 2)
        return np.column_stack((zs, vs))

    def to_dict(self) -> dict:
        return {
            "interpolation": self.interpolation,
            "knots_z": self.knots_z.tolist(),
            "knots_v": self.knots_v.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MonotoneFn":
        return cls(payload["knots_z"], payload["knots_v"], payload.get("interpolation", "linear"))


def build_monotone_fn(fit: IsotonicFit, interpolation: Interpolation = "linear") -> MonotoneFn:
    """Turn a fit into a function of ``z``; tied abscissae collapse to one knot."""
    z = fit.z
    keep = np.empty(z.size, dtype=bool)
    keep[0] = True
    np.not_equal(z[1:], z[:-1], out=keep[1:])
    kv = np.maximum.accumulate(fit.yhat[keep])
    return MonotoneFn(z[keep], kv, interpolation)
