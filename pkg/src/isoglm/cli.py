"""Command-line entry point: ``isoglm fit | experiment {synthetic,tabular,rate} | rerun``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .errors import InvalidInputError
from .experiments import (
    SYNTHETIC_ALGORITHMS,
    TABULAR_ALGORITHMS,
    RunConfig,
    config_from_report,
    run,
    write_outputs,
)


def _algorithms(text: str) -> list[str]:
    return [a.strip() for a in text.split(",") if a.strip()]


def _add_common(p: argparse.ArgumentParser, algorithms: Sequence[str], folds: bool = True) -> None:
    p.add_argument("--algorithms", type=_algorithms, default=list(algorithms),
                   help="comma-separated list of lisotron, isotron, glmtron[:TRANSFER], "
                        "linear, logistic, sim, mean")
    p.add_argument("--iterations", type=int, default=None,
                   help="iterations for trace learners (default: ceil(2*sqrt(m)), at most 500)")
    if folds:
        p.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0, help="root random seed")
    p.add_argument("--holdout-fraction", type=float, default=0.2,
                   help="share of each training split held out for iterate selection")
    p.add_argument("--out", default="results", help="output directory")


def _add_file_source(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--dataset", required=required, help="delimited numeric file with a header row")
    p.add_argument("--target", default="-1", help="target column name or index (default: last)")
    p.add_argument("--scaling", choices=["unit-ball", "none"], default="unit-ball",
                   help="feature scaling; targets are always min-max scaled")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoglm", formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Fit GLM-tron / L-Isotron / Isotron and baselines; run CV experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit models on a dataset file",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_file_source(fit)
    _add_common(fit, ["lisotron"], folds=False)

    exp = sub.add_parser("experiment", help="cross-validated experiments")
    exp_sub = exp.add_subparsers(dest="experiment", required=True)

    syn = exp_sub.add_parser("synthetic", help="sparse single-index synthetic benchmark",
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    syn.add_argument("--d", type=int, default=400, help="dimension")
    syn.add_argument("--m", type=int, default=600, help="rows per repeat")
    syn.add_argument("--repeats", type=int, default=10, help="independent datasets")
    _add_common(syn, SYNTHETIC_ALGORITHMS)

    tab = exp_sub.add_parser("tabular", help="cross-validation on a dataset file",
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_file_source(tab)
    tab.add_argument("--repeats", type=int, default=1, help="repeats with fresh fold plans")
    _add_common(tab, TABULAR_ALGORITHMS)

    rate = exp_sub.add_parser("rate", help="excess error vs sample size on realizable data",
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    rate.add_argument("--d", type=int, default=10, help="dimension")
    rate.add_argument("--W", type=float, default=3.0, help="norm of the true direction")
    rate.add_argument("--transfer", default="sigmoid-rescaled", help="true transfer function")
    rate.add_argument("--m-grid", type=lambda t: [int(v) for v in t.split(",")],
                      default=[500, 2000, 8000], help="comma-separated sample sizes")
    rate.add_argument("--repeats", type=int, default=3, help="datasets per sample size")
    _add_common(rate, ["glmtron"], folds=False)

    rerun = sub.add_parser("rerun", help="repeat a run from the config embedded in its report")
    rerun.add_argument("report", help="report.json or model.json from an earlier run")
    rerun.add_argument("--out", default="results-rerun", help="output directory")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "rerun":
        return config_from_report(args.report)
    if args.command == "experiment" and args.experiment == "synthetic":
        dataset = {"kind": "synthetic-sim", "d": args.d, "m": args.m}
    elif args.command == "experiment" and args.experiment == "rate":
        dataset = {"kind": "realizable-glm", "d": args.d, "W": args.W,
                   "transfer": args.transfer, "m_grid": args.m_grid}
    else:
        dataset = {"kind": "file", "path": args.dataset, "target": args.target, "scaling": args.scaling}
    command = "fit" if args.command == "fit" else f"experiment-{args.experiment}"
    return RunConfig(
        command=command,
        dataset=dataset,
        algorithms=args.algorithms,
        iterations=args.iterations,
        folds=getattr(args, "folds", 10),
        repeats=getattr(args, "repeats", 1),
        seed=args.seed,
        holdout_fraction=args.holdout_fraction,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        result = run(config)
        paths = write_outputs(result, args.out)
    except (InvalidInputError, OSError, KeyError, ValueError) as exc:
        msg = str(exc) if not isinstance(exc, OSError) or not exc.filename else \
            f"{exc.strerror}: {exc.filename}"
        print(f"isoglm: error: {msg}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
