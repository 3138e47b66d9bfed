"""Conformal p-variables and e-variables from calibration scores.

Given exchangeable calibration scores S_1..S_n and a test score s, two
kinds of evidence statistics are produced:

- the randomized conformal p-variable
      P = (u * (1 + t) + g) / (n + 1),
  where g counts calibration scores strictly above s, t counts exact
  ties, and u is a single uniform draw supplied by the caller;
- the conformal e-variable
      E = s / ((S_1 + ... + S_n + s) / (n + 1)),
  whose mean is exactly 1 whenever the n+1 scores are exchangeable.

Large e-values (small p-values) are evidence that the test score does
not blend in with the calibration scores, i.e. against the null that
the test unit fails its quality requirement.

The oracle e-variable is the same ratio evaluated at the score of the
true (normally unobserved) test response; it never enters a selection
decision and exists for validation: its mean-one identity and the fact
that it dominates the feasible e-variable under the null are what the
reliability guarantees rest on.

All functions are deterministic given their arguments; randomization
enters only through explicitly passed uniform draws, so runs replay
exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateScoresWarning

E_KINDS = ("standard", "oracle", "risk_adjusted", "weighted")

#: Relative slack when validating the weight budget, absorbing the
#: rounding of an exact-budget rescale.
_BUDGET_RTOL = 1e-9


def _as_scores(values, name: str = "scores") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DataError(f"{name} must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contain non-finite values")
    if np.any(arr < 0):
        raise DataError(f"{name} must be non-negative")
    return arr


@dataclass(frozen=True)
class CalibrationScores:
    """Non-negative conformity scores of the labeled calibration sample."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_scores(self.values, "calibration scores"))

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class PVector:
    """Conformal p-variables for a test batch, with their tie-break draws."""

    values: np.ndarray
    tiebreak_draws: np.ndarray | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise DataError("p-variables must be a non-empty 1-d sequence")
        if np.any(vals <= 0) or np.any(vals > 1):
            raise DataError("p-variables must lie in (0, 1]")
        object.__setattr__(self, "values", vals)
        draws = self.tiebreak_draws
        if draws is None:
            draws = np.zeros_like(vals)
        draws = np.asarray(draws, dtype=float)
        if draws.shape != vals.shape or np.any(draws < 0) or np.any(draws >= 1):
            raise DataError("tie-break draws must match the batch and lie in [0, 1)")
        object.__setattr__(self, "tiebreak_draws", draws)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class EVector:
    """E-variables for a test batch.

    ``kind`` records how the values were obtained: "standard" conformal,
    "oracle" (true-label scores, validation only), "risk_adjusted"
    (externally constructed for a continuous loss), or "weighted".
    """

    values: np.ndarray
    kind: str = "standard"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_scores(self.values, "e-variables"))
        if self.kind not in E_KINDS:
            raise DataError(f"unknown e-variable kind {self.kind!r}; expected one of {E_KINDS}")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class WeightVector:
    """Per-unit priority weights under the budget sum(w) <= m."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DataError("weights must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DataError("weights must be finite and non-negative")
        total = float(arr.sum())
        m = arr.size
        if total > m * (1.0 + _BUDGET_RTOL):
            raise DataError(
                f"weight budget violated: sum(w) = {total!r} exceeds batch size m = {m}"
            )
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)


def conformal_p(cal: CalibrationScores, test_score: float, u: float) -> float:
    """Randomized conformal p-variable for one test unit.

    ``u`` must come from the caller's RNG stream and lie in [0, 1); a
    single draw resolves all ties for this unit.  The returned value is
    positive except on the measure-zero event u == 0 with no calibration
    score above ``test_score``, which is nudged to the next float up so
    the (0, 1] contract holds.
    """
    if not math.isfinite(test_score) or test_score < 0:
        raise DataError(f"test score must be finite and non-negative, got {test_score!r}")
    if not 0.0 <= u < 1.0:
        raise DataError(f"tie-break draw must lie in [0, 1), got {u!r}")
    vals = cal.values
    g = int(np.count_nonzero(vals > test_score))
    t = int(np.count_nonzero(vals == test_score))
    p = (u * (1 + t) + g) / (len(cal) + 1)
    if p <= 0.0:
        p = math.nextafter(0.0, 1.0)
    return float(p)


def conformal_p_batch(cal: CalibrationScores, test_scores, us) -> PVector:
    """Conformal p-variables for a whole test batch, one draw per unit."""
    scores = _as_scores(test_scores, "test scores")
    draws = np.asarray(us, dtype=float)
    if draws.shape != scores.shape:
        raise DataError("one tie-break draw per test unit is required")
    vals = np.array(
        [conformal_p(cal, float(s), float(u)) for s, u in zip(scores, draws)]
    )
    return PVector(values=vals, tiebreak_draws=draws)


def conformal_e(cal: CalibrationScores, test_score: float) -> float:
    """Conformal e-variable for one test unit.

    If every score (calibration and test) is zero the statistic is
    undefined; 0.0 is returned — no evidence — and a
    :class:`DegenerateScoresWarning` is emitted instead of aborting, so
    whole-batch pipelines survive all-floor score batches.
    """
    if not math.isfinite(test_score) or test_score < 0:
        raise DataError(f"test score must be finite and non-negative, got {test_score!r}")
    total = float(cal.values.sum()) + test_score
    if total == 0.0:
        warnings.warn(
            "all scores are zero; conformal e-variable degenerates to 0",
            DegenerateScoresWarning,
            stacklevel=2,
        )
        return 0.0
    n1 = len(cal) + 1
    return float(test_score / (total / n1))


def conformal_e_batch(cal: CalibrationScores, test_scores, kind: str = "standard") -> EVector:
    """Conformal e-variables for a whole test batch against shared calibration."""
    scores = _as_scores(test_scores, "test scores")
    cal_sum = float(cal.values.sum())
    n1 = len(cal) + 1
    totals = cal_sum + scores
    values = np.zeros_like(scores)
    nonzero = totals > 0.0
    values[nonzero] = scores[nonzero] * n1 / totals[nonzero]
    if not np.all(nonzero):
        warnings.warn(
            "all scores are zero for some test units; their e-variables degenerate to 0",
            DegenerateScoresWarning,
            stacklevel=2,
        )
    return EVector(values=values, kind=kind)


def oracle_e(cal: CalibrationScores, true_test_score: float) -> float:
    """E-variable evaluated at the score of the true test response.

    Same ratio as :func:`conformal_e`; requires labels, so it is only
    used by metrics and validation code, never by selection.
    """
    return conformal_e(cal, true_test_score)


def oracle_e_batch(cal: CalibrationScores, true_test_scores) -> EVector:
    """Oracle e-variables for a labeled test batch."""
    ev = conformal_e_batch(cal, true_test_scores, kind="oracle")
    return ev


def binary_risk_e(cal: CalibrationScores, test_score: float) -> float:
    """Risk-adjusted e-variable for the binary loss 1{Y <= c}.

    With a binary loss the generalized risk constraint reduces to the
    standard conformal construction, so this is :func:`conformal_e`
    under the risk-control reading.  Continuous-loss constructions are
    ingested externally (see the test CSV ``e_g`` column).
    """
    return conformal_e(cal, test_score)


def weighted_e(e: EVector, w: WeightVector) -> EVector:
    """Apply priority weights elementwise, preserving post-hoc validity.

    The budget sum(w) <= m is what keeps the weighted guarantee intact;
    :class:`WeightVector` rejects violations with the offending sum.
    """
    if len(e) != len(w):
        raise DataError(f"e-variables ({len(e)}) and weights ({len(w)}) differ in length")
    return EVector(values=e.values * w.values, kind="weighted")
