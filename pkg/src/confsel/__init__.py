"""Utility-driven conformal selection with e-variables.

Select test units whose unobserved outcomes likely meet a quality
requirement, either at a fixed target FDR (BH over conformal
p-variables) or post hoc: build the full e-BH candidate path with
per-set FDP estimates, then pick the operating point maximizing a
user utility over set size and estimated error.  The declared estimate
satisfies a mean reliability bound that holds uniformly along the path,
so choosing after seeing the data is statistically safe.
"""

from .conformal import (
    CalibrationScores,
    EVector,
    PVector,
    WeightVector,
    binary_risk_e,
    conformal_e,
    conformal_e_batch,
    conformal_p,
    conformal_p_batch,
    oracle_e,
    oracle_e_batch,
    weighted_e,
)
from .datasim import (
    LabeledBatch,
    SyntheticConfig,
    fit_knn,
    fit_ridge,
    gen_synthetic,
    load_predictions,
    substream,
)
from .errors import (
    ConfigError,
    ConfselError,
    DataError,
    DegenerateScoresWarning,
    InternalCheckError,
)
from .metrics import (
    AggregateReport,
    TrialReport,
    aggregate,
    fdp,
    generalized_fdp,
    reliability_ratio,
    taylor_gap,
)
from .scoring import (
    ScoreSpec,
    clamp_prediction,
    normalize_prediction,
    score_at_threshold,
    score_value,
)
from .selection import (
    PathEntry,
    SelectionOutcome,
    SelectionPath,
    bh_select,
    build_path,
    ebh_select,
    maximize_utility,
    ph_cs,
    ph_rcs,
)
from .utility import UtilitySpec, evaluate

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "CalibrationScores",
    "ConfigError",
    "ConfselError",
    "DataError",
    "DegenerateScoresWarning",
    "EVector",
    "InternalCheckError",
    "LabeledBatch",
    "PathEntry",
    "PVector",
    "ScoreSpec",
    "SelectionOutcome",
    "SelectionPath",
    "SyntheticConfig",
    "TrialReport",
    "UtilitySpec",
    "WeightVector",
    "aggregate",
    "bh_select",
    "binary_risk_e",
    "build_path",
    "clamp_prediction",
    "conformal_e",
    "conformal_e_batch",
    "conformal_p",
    "conformal_p_batch",
    "ebh_select",
    "evaluate",
    "fdp",
    "fit_knn",
    "fit_ridge",
    "gen_synthetic",
    "generalized_fdp",
    "load_predictions",
    "maximize_utility",
    "normalize_prediction",
    "oracle_e",
    "oracle_e_batch",
    "ph_cs",
    "ph_rcs",
    "reliability_ratio",
    "score_at_threshold",
    "score_value",
    "substream",
    "taylor_gap",
    "weighted_e",
]
