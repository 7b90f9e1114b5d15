"""Linear directions, transfer functions and the hypotheses built from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .isotonic import FEASIBILITY_TOL, MonotoneFn


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _ramp(t):
    return np.clip(0.5 * (1.0 + t), 0.0, 1.0)


def _clamp_identity(t):
    return np.clip(t, 0.0, 1.0)


KNOWN_TRANSFERS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sigmoid-rescaled": _sigmoid,
    "ramp": _ramp,
    "clamp-identity": _clamp_identity,
}

_CHECK_GRID = np.linspace(-20.0, 20.0, 8001)


@dataclass
class LinearDirection:
    w: np.ndarray
    norm_bound: Optional[float] = None

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(self.w)):
            raise InvalidInputError("direction entries must be finite")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def project(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.w


class TransferSpec:
    """A non-decreasing, 1-Lipschitz map into [0, 1].

    Either one of :data:`KNOWN_TRANSFERS` (by name) or a fitted
    :class:`~isoglm.isotonic.MonotoneFn`. Analytic transfers are checked on a
    grid when constructed.
    """

    def __init__(self, name: Optional[str] = None, fitted: Optional[MonotoneFn] = None):
        if (name is None) == (fitted is None):
            raise InvalidInputError("give exactly one of a transfer name or a fitted function")
        if name is not None and name not in KNOWN_TRANSFERS:
            raise InvalidInputError(
                f"unknown transfer {name!r}; choose from {sorted(KNOWN_TRANSFERS)}")
        self.name = name
        self.fitted = fitted
        self._fn = KNOWN_TRANSFERS[name] if name is not None else fitted
        if name is not None:
            self._check_on_grid()

    @classmethod
    def known(cls, name: str) -> "TransferSpec":
        return cls(name=name)

    @classmethod
    def from_fn(cls, fn: MonotoneFn) -> "TransferSpec":
        return cls(fitted=fn)

    @property
    def is_known(self) -> bool:
        return self.name is not None

    def _check_on_grid(self) -> None:
        vals = self._fn(_CHECK_GRID)
        steps = np.diff(vals)
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise InvalidInputError(f"transfer {self.name} leaves [0, 1]")
        if np.any(steps < -FEASIBILITY_TOL):
            raise InvalidInputError(f"transfer {self.name} is not non-decreasing")
        if np.any(steps > np.diff(_CHECK_GRID) + FEASIBILITY_TOL):
            raise InvalidInputError(f"transfer {self.name} is not 1-Lipschitz")

    def __call__(self, t) -> np.ndarray:
        return self._fn(np.asarray(t, dtype=float))

    def __repr__(self) -> str:
        return f"TransferSpec({self.name!r})" if self.is_known else f"TransferSpec({self.fitted!r})"

    def to_dict(self) -> dict:
        if self.is_known:
            return {"kind": "known", "name": self.name}
        return {"kind": "fitted", **self.fitted.to_dict()}

    @classmethod
    def from_dict(cls, payload: dict) -> "TransferSpec":
        if payload["kind"] == "known":
            return cls.known(payload["name"])
        return cls.from_fn(MonotoneFn.from_dict(payload))


@dataclass
class Hypothesis:
    """``x -> transfer(w . x)``."""

    direction: LinearDirection
    transfer: TransferSpec

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.transfer(self.direction.project(features))

    def to_dict(self) -> dict:
        return {"w": self.direction.w.tolist(), "transfer": self.transfer.to_dict()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Hypothesis":
        return cls(LinearDirection(payload["w"]), TransferSpec.from_dict(payload["transfer"]))
