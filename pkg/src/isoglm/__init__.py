"""Learning generalized linear and single index models with (Lipschitz)
isotonic regression: GLM-tron, L-Isotron, Isotron and baselines."""

from .baselines import BaselineModel, fit_linear, fit_logistic, fit_sim_alternating
from .data import (
    FoldPlan,
    LabeledDataset,
    generate_realizable_glm,
    generate_synthetic_sim,
    load_tabular,
    make_folds,
)
from .errors import DegenerateTargetError, InvalidInputError, OracleError
from .evaluation import (
    ErrorReport,
    ExperimentReport,
    empirical_excess_error,
    empirical_sq_error,
    holdout_select,
    run_cv_experiment,
)
from .hypothesis import Hypothesis, LinearDirection, TransferSpec
from .isotonic import (
    IsotonicFit,
    MonotoneFn,
    RegressionInstance,
    build_monotone_fn,
    lpav,
    lpav_reference_oracle,
    pav,
)
from .learners import TrainingTrace, glmtron_fit, isotron_fit, lisotron_fit

__version__ = "0.1.0"
