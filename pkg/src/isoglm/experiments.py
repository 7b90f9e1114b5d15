"""Run configurations and the runs behind each CLI subcommand.

A :class:`RunConfig` holds everything that determines a run's results (the
output directory is deliberately not part of it), and is embedded in every
report so a run can be repeated from its own output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import LabeledDataset, generate_realizable_glm, generate_synthetic_sim, load_tabular, make_folds
from .errors import InvalidInputError
from .evaluation import (
    ExperimentReport,
    empirical_excess_error,
    error_report,
    fit_with_selection,
    merge_reports,
    resolve_algorithm,
    run_cv_experiment,
    write_plot_data,
)
from .hypothesis import Hypothesis

logger = logging.getLogger(__name__)

STREAM_DATA = 2
STREAM_FOLDS = 3
STREAM_FIT = 4

SYNTHETIC_ALGORITHMS = ["lisotron", "isotron"]
TABULAR_ALGORITHMS = ["lisotron", "glmtron", "isotron", "linear", "logistic", "sim"]


@dataclass
class RunConfig:
    command: str
    dataset: dict
    algorithms: list[str]
    iterations: Optional[int] = None
    folds: int = 10
    repeats: int = 1
    seed: int = 0
    holdout_fraction: float = 0.2

    def validate(self) -> None:
        if self.command not in ("fit", "experiment-synthetic", "experiment-tabular", "experiment-rate"):
            raise InvalidInputError(f"unknown command {self.command!r}")
        if not self.algorithms:
            raise InvalidInputError("no algorithms given")
        for name in self.algorithms:
            resolve_algorithm(name)
        if self.iterations is not None and self.iterations < 1:
            raise InvalidInputError(f"--iterations must be a positive integer, got {self.iterations}")
        if self.folds < 2:
            raise InvalidInputError("--folds must be at least 2")
        if self.repeats < 1:
            raise InvalidInputError("--repeats must be at least 1")
        if not 0.0 < self.holdout_fraction <= 0.5:
            raise InvalidInputError("holdout fraction must lie in (0, 0.5]")
        kind = self.dataset.get("kind")
        if kind not in ("file", "synthetic-sim", "realizable-glm"):
            raise InvalidInputError(f"unknown dataset kind {kind!r}")
        if self.command == "experiment-rate" and (kind != "realizable-glm" or not self.dataset.get("m_grid")):
            raise InvalidInputError("rate study needs a realizable-glm dataset with an m grid")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        return cls(**payload)


def _seed(config: RunConfig, stream: int, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed, spawn_key=(stream, repeat))


def load_dataset(spec: dict, seed=None) -> LabeledDataset:
    kind = spec["kind"]
    if kind == "file":
        return load_tabular(spec["path"], spec["target"], spec.get("scaling", "unit-ball"))
    if kind == "synthetic-sim":
        return generate_synthetic_sim(spec["d"], spec["m"], seed)
    return generate_realizable_glm(spec["d"], spec["m"], spec["W"], spec["transfer"], seed)


@dataclass
class RunResult:
    config: RunConfig
    report: Optional[ExperimentReport] = None
    models: dict = field(default_factory=dict)
    transfers: dict = field(default_factory=dict)
    rate: Optional[dict] = None

    def report_dict(self) -> dict:
        if self.report is not None:
            payload = self.report.to_dict()
            payload["config"] = {"run": self.config.to_dict(), "cv": payload["config"]}
            return payload
        if self.rate is not None:
            return {"config": {"run": self.config.to_dict()}, **self.rate}
        return {"config": {"run": self.config.to_dict()}, "models": self.models}

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), indent=2)


def _cv_repeats(config: RunConfig) -> ExperimentReport:
    reports = []
    for r in range(config.repeats):
        data = load_dataset(config.dataset, _seed(config, STREAM_DATA, r))
        plan = make_folds(data.m, config.folds, _seed(config, STREAM_FOLDS, r))
        reports.append(run_cv_experiment(data, config.algorithms, plan, config.iterations,
                                         config.holdout_fraction, config.seed, repeat=r))
        logger.info("repeat %d/%d done", r + 1, config.repeats)
    return merge_reports(reports)


def _selected_transfers(config: RunConfig) -> dict:
    """Transfers of L-Isotron / Isotron fitted (with hold-out selection) on the
    first repeat's full dataset, for plotting."""
    wanted = [a for a in ("lisotron", "isotron") if a in config.algorithms]
    if not wanted:
        return {}
    data = load_dataset(config.dataset, _seed(config, STREAM_DATA, 0))
    out = {}
    for name in wanted:
        model, _, _ = fit_with_selection(name, data, config.iterations, config.holdout_fraction,
                                         _seed(config, STREAM_FIT, 0))
        out[name] = model.transfer.fitted
    return out


def _rate_study(config: RunConfig) -> dict:
    """Hold-out-selected excess error on realizable data over a grid of sample sizes.

    Each repeat draws a fresh dataset per sample size; the excess error of
    the selected hypothesis is measured on the whole sample (fixed design).
    """
    spec = config.dataset
    grid = [int(m) for m in spec["m_grid"]]
    runs, summary = [], {}
    for name in config.algorithms:
        per_m = {m: [] for m in grid}
        for r in range(config.repeats):
            for m in grid:
                data = generate_realizable_glm(
                    spec["d"], m, spec["W"], spec["transfer"],
                    np.random.SeedSequence(config.seed, spawn_key=(STREAM_DATA, r, m)))
                model, idx, used = fit_with_selection(
                    name, data, config.iterations, config.holdout_fraction,
                    np.random.SeedSequence(config.seed, spawn_key=(STREAM_FIT, r, m)))
                excess = empirical_excess_error(model, data)
                per_m[m].append(excess)
                runs.append({"algorithm": name, "repeat": r, "m": m, "excess_error": excess,
                             "selected_iteration": idx, "iterations": used})
                logger.info("%s repeat %d m=%d: excess %.3g", name, r, m, excess)
        summary[name] = {str(m): float(np.mean(v)) for m, v in per_m.items()}
    return {"runs": runs, "mean_excess_error": summary}


def run(config: RunConfig) -> RunResult:
    """Execute a configuration in memory; nothing is written."""
    config.validate()
    result = RunResult(config)
    if config.command == "fit":
        data = load_dataset(config.dataset, _seed(config, STREAM_DATA, 0))
        for name in config.algorithms:
            model, idx, used = fit_with_selection(name, data, config.iterations,
                                                  config.holdout_fraction, _seed(config, STREAM_FIT, 0))
            result.models[name] = {
                "model": model.to_dict(),
                "selected_iteration": idx,
                "iterations": used,
                "train_error": asdict(error_report(model, data)),
            }
            if isinstance(model, Hypothesis) and not model.transfer.is_known:
                result.transfers[name] = model.transfer.fitted
        return result
    if config.command == "experiment-rate":
        result.rate = _rate_study(config)
        return result
    result.report = _cv_repeats(config)
    result.transfers = _selected_transfers(config)
    return result


def write_outputs(result: RunResult, out_dir) -> list[Path]:
    """Write report files into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str) -> None:
        path = out / name
        path.write_text(text)
        written.append(path)

    if result.rate is not None:
        put("rate.json", result.report_json())
    elif result.report is not None:
        put("report.json", result.report_json())
        put("folds.csv", result.report.folds_csv())
        put("table_errors.csv", result.report.table_csv("errors"))
        put("table_differences.csv", result.report.table_csv("differences"))
        put("timings.json", json.dumps(result.report.timings, indent=2))
    else:
        put("model.json", result.report_json())
    for name, fn in result.transfers.items():
        path = out / f"transfer_{name}.txt"
        write_plot_data(fn, path, header=f"{name} transfer: z u(z) ({fn.interpolation})")
        written.append(path)
    return written


def config_from_report(path) -> RunConfig:
    payload = json.loads(Path(path).read_text())
    return RunConfig.from_dict(payload["config"]["run"])
