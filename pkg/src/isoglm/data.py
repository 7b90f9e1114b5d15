"""Datasets: synthetic generators, delimited-file loading and fold plans.

Every random construction takes an integer seed (or a
``numpy.random.SeedSequence``) and draws from its own PCG64 stream, so a
dataset and the folds cut from it never share random state.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DegenerateTargetError, InvalidInputError
from .hypothesis import Hypothesis, LinearDirection, TransferSpec

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]


def make_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass
class LabeledDataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = "dataset"
    ground_truth: Optional[Hypothesis] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).ravel()
        if self.features.shape[0] != self.targets.size:
            raise InvalidInputError(
                f"{self.features.shape[0]} feature rows but {self.targets.size} targets")
        if self.targets.size == 0:
            raise InvalidInputError("dataset is empty")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise InvalidInputError("features and targets must be finite")
        if np.any(self.targets < 0.0) or np.any(self.targets > 1.0):
            raise InvalidInputError("targets must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.targets.size

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.m

    def conditional_means(self) -> np.ndarray:
        if self.ground_truth is None:
            raise InvalidInputError(f"{self.name} has no ground truth")
        return self.ground_truth.predict(self.features)

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.targets[rows], self.name,
                              self.ground_truth, dict(self.meta))


def generate_synthetic_sim(d: int, m: int, seed: Seed) -> LabeledDataset:
    """Sparse single-index data with true direction ``e_1`` and ramp transfer.

    Each row has first coordinate uniform on {-1, 0, 1} plus a single 1 at a
    uniformly chosen coordinate among the remaining ``d - 1``. Labels are
    Bernoulli with mean ``(1 + x_1) / 2``.
    """
    if d < 2:
        raise InvalidInputError("d must be at least 2")
    if m < 1:
        raise InvalidInputError("m must be positive")
    rng = make_rng(seed)
    x = np.zeros((m, d))
    x[:, 0] = rng.integers(-1, 2, size=m)
    x[np.arange(m), 1 + rng.integers(0, d - 1, size=m)] = 1.0
    w = np.zeros(d)
    w[0] = 1.0
    truth = Hypothesis(LinearDirection(w, norm_bound=1.0), TransferSpec.known("ramp"))
    means = truth.predict(x)
    y = (rng.random(m) < means).astype(float)
    return LabeledDataset(x, y, name=f"synthetic-sim-d{d}-m{m}", ground_truth=truth,
                          meta={"generator": "synthetic-sim", "d": d, "m": m})


def generate_realizable_glm(d: int, m: int, W: float, transfer_name: str, seed: Seed) -> LabeledDataset:
    """Data drawn exactly from ``E[y|x] = u(w . x)``.

    ``w`` is uniform on the sphere of radius ``W``, ``x`` uniform in the unit
    ball and ``y ~ Bernoulli(u(w . x))``.
    """
    if d < 1 or m < 1:
        raise InvalidInputError("d and m must be positive")
    if not W >= 0.0:
        raise InvalidInputError("W must be non-negative")
    transfer = TransferSpec.known(transfer_name)
    rng = make_rng(seed)
    direction = rng.standard_normal(d)
    direction *= W / np.linalg.norm(direction)
    g = rng.standard_normal((m, d))
    radii = rng.random(m) ** (1.0 / d)
    x = g * (radii / np.linalg.norm(g, axis=1))[:, None]
    truth = Hypothesis(LinearDirection(direction, norm_bound=W), transfer)
    y = (rng.random(m) < truth.predict(x)).astype(float)
    return LabeledDataset(x, y, name=f"realizable-{transfer_name}-d{d}-m{m}", ground_truth=truth,
                          meta={"generator": "realizable-glm", "d": d, "m": m, "W": W,
                                "transfer": transfer_name})


def scale_dataset(features: np.ndarray, targets: np.ndarray, scaling: str = "unit-ball"):
    """Min-max scale targets to [0, 1] and optionally shrink features into the unit ball.

    Returns ``(features, targets, constants)``; ``constants`` records what was
    applied so the transform can be reported or inverted.
    """
    if scaling not in ("unit-ball", "none"):
        raise InvalidInputError(f"unknown scaling {scaling!r}")
    lo, hi = float(targets.min()), float(targets.max())
    if not hi > lo:
        raise DegenerateTargetError("degenerate target range: all targets are equal")
    targets = (targets - lo) / (hi - lo)
    constants = {"target_min": lo, "target_max": hi, "feature_scale": 1.0}
    if scaling == "unit-ball":
        norm = float(np.linalg.norm(features, axis=1).max())
        if norm > 0.0:
            features = features / norm
            constants["feature_scale"] = norm
    return features, targets, constants


def _sniff_delimiter(header: str) -> Optional[str]:
    for delim in (",", ";", "\t"):
        if delim in header:
            return delim
    return None


def load_tabular(path, target_column: Union[str, int], scaling: str = "unit-ball") -> LabeledDataset:
    """Read a numeric delimited file with a header row.

    The delimiter (comma, semicolon, tab or runs of whitespace) is inferred
    from the header. Rows with missing or non-numeric cells are dropped and
    counted in ``meta["rejected_rows"]``.

    Raises:
        FileNotFoundError: if ``path`` does not exist.
        InvalidInputError: unknown target column, or no usable rows.
        DegenerateTargetError: all targets equal.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidInputError(f"{path} is empty")
    delim = _sniff_delimiter(lines[0])
    if delim is None:
        rows = [ln.split() for ln in lines]
    else:
        rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delim))
    header = [h.strip().strip('"') for h in rows[0]]

    if isinstance(target_column, str) and target_column in header:
        target_idx = header.index(target_column)
    else:
        try:
            target_idx = int(target_column)
        except (TypeError, ValueError):
            raise InvalidInputError(f"target column {target_column!r} not found in {path}") from None
        if not -len(header) <= target_idx < len(header):
            raise InvalidInputError(f"target column index {target_idx} out of range for {path}")
        target_idx %= len(header)

    good, rejected = [], 0
    for row in rows[1:]:
        if len(row) != len(header):
            rejected += 1
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            rejected += 1
            continue
        if not all(math.isfinite(v) for v in values):
            rejected += 1
            continue
        good.append(values)
    if rejected:
        logger.warning("%s: rejected %d malformed rows", path, rejected)
    if not good:
        raise InvalidInputError(f"{path} has no usable rows")

    table = np.array(good)
    targets = table[:, target_idx]
    features = np.delete(table, target_idx, axis=1)
    features, targets, constants = scale_dataset(features, targets, scaling)
    meta = {
        "source": str(path),
        "target_column": header[target_idx],
        "feature_columns": [h for i, h in enumerate(header) if i != target_idx],
        "scaling": scaling,
        "rejected_rows": rejected,
        **constants,
    }
    return LabeledDataset(features, targets, name=path.stem, meta=meta)


@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    assignments: np.ndarray
    seed: Optional[int] = None

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.fold_count)


def make_folds(m: int, fold_count: int, seed: Seed) -> FoldPlan:
    """Shuffle row indices with ``seed`` and deal them round-robin into folds."""
    if fold_count < 2:
        raise InvalidInputError("fold_count must be at least 2")
    if m < fold_count:
        raise InvalidInputError(f"cannot split {m} rows into {fold_count} folds")
    perm = make_rng(seed).permutation(m)
    assignments = np.empty(m, dtype=int)
    assignments[perm] = np.arange(m) % fold_count
    return FoldPlan(fold_count, assignments, seed if isinstance(seed, int) else None)
