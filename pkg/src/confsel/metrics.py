"""Realized error and reliability statistics over selection trials.

The realized false discovery proportion of a selected set is the
fraction of its members whose response failed the quality requirement,
with an empty selection contributing 0.  Its generalized form swaps the
binary indicator for a per-unit loss in [0, 1].  Across a campaign of
trials the quantities of interest are the empirical FDR (mean FDP), the
mean declared level, and the reliability ratio mean(FDP / declared
alpha), which the post-hoc guarantee bounds by 1 in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InternalCheckError


@dataclass(frozen=True)
class TrialReport:
    """Outcome of one Monte Carlo trial, enough to audit every guarantee."""

    trial_id: int
    set_size: int
    declared_alpha: float
    realized_fdp: float
    realized_utility: float
    variant: str
    seed: int

    def __post_init__(self) -> None:
        if self.set_size == 0 and self.realized_fdp != 0.0:
            raise InternalCheckError("empty selection must have FDP 0")
        if not 0.0 <= self.realized_fdp <= 1.0:
            raise InternalCheckError(f"FDP must lie in [0, 1], got {self.realized_fdp}")
        if not 0.0 <= self.declared_alpha <= 1.0:
            raise InternalCheckError(f"declared alpha must lie in [0, 1], got {self.declared_alpha}")


@dataclass(frozen=True)
class AggregateReport:
    """Campaign-level means with standard errors (unbiased sample variance)."""

    variant: str
    n_trials: int
    mean_fdp: float
    se_fdp: float
    mean_alpha: float
    se_alpha: float
    reliability_ratio: float
    se_ratio: float
    mean_size: float
    se_size: float
    mean_utility: float
    se_utility: float


def _members_array(members: Iterable[int], m: int) -> np.ndarray:
    idx = np.asarray(sorted(members), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise DataError(f"member index out of range for batch size {m}")
    return idx


def fdp(members: Iterable[int], null_flags: Sequence[bool]) -> float:
    """False discovery proportion: selected nulls over max(1, selected)."""
    flags = np.asarray(null_flags, dtype=bool)
    idx = _members_array(members, flags.size)
    if idx.size == 0:
        return 0.0
    return float(np.count_nonzero(flags[idx]) / idx.size)


def generalized_fdp(members: Iterable[int], losses: Sequence[float]) -> float:
    """Per-selected-unit risk: mean loss over the selected set.

    Reduces to :func:`fdp` when the losses are 0/1 indicators.
    """
    arr = np.asarray(losses, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise DataError("losses must lie in [0, 1]")
    idx = _members_array(members, arr.size)
    if idx.size == 0:
        return 0.0
    return float(arr[idx].sum() / idx.size)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean()) if n else math.nan
    if n < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(n))


def trial_ratios(reports: Sequence[TrialReport]) -> np.ndarray:
    """Per-trial FDP / declared-alpha ratios; empty selections count 0.

    A declared level of 0 can only occur at the empty entry, where the
    FDP is 0 by definition; that combination contributes ratio 0 and any
    other zero-alpha report is rejected as an internal error.
    """
    ratios = np.empty(len(reports))
    for i, rep in enumerate(reports):
        if rep.set_size == 0:
            ratios[i] = 0.0
        elif rep.declared_alpha > 0.0:
            ratios[i] = rep.realized_fdp / rep.declared_alpha
        elif rep.realized_fdp == 0.0:
            ratios[i] = 0.0
        else:
            raise InternalCheckError(
                f"trial {rep.trial_id}: declared alpha 0 with positive FDP {rep.realized_fdp}"
            )
    return ratios


def reliability_ratio(reports: Sequence[TrialReport]) -> tuple[float, float]:
    """Mean of FDP / declared-alpha across trials, with its standard error."""
    if not reports:
        raise DataError("no trial reports")
    return _mean_se(trial_ratios(reports))


def taylor_gap(reports: Sequence[TrialReport]) -> dict[str, float]:
    """Diagnostic: does the mean declared level sit above the empirical FDR?

    The mean-ratio guarantee implies this only to first order, so the
    gap is reported rather than asserted.
    """
    if not reports:
        raise DataError("no trial reports")
    alphas = np.array([r.declared_alpha for r in reports])
    fdps = np.array([r.realized_fdp for r in reports])
    mean_alpha = float(alphas.mean())
    mean_fdp = float(fdps.mean())
    return {"mean_alpha": mean_alpha, "mean_fdp": mean_fdp, "gap": mean_alpha - mean_fdp}


def aggregate(reports: Sequence[TrialReport]) -> AggregateReport:
    """Campaign summary for a single variant's trial reports."""
    if not reports:
        raise DataError("no trial reports")
    variants = {r.variant for r in reports}
    if len(variants) != 1:
        raise DataError(f"aggregate expects a single variant, got {sorted(variants)}")
    fdps = np.array([r.realized_fdp for r in reports])
    alphas = np.array([r.declared_alpha for r in reports])
    sizes = np.array([r.set_size for r in reports], dtype=float)
    utils = np.array([r.realized_utility for r in reports])
    mean_fdp, se_fdp = _mean_se(fdps)
    mean_alpha, se_alpha = _mean_se(alphas)
    ratio, se_ratio = _mean_se(trial_ratios(reports))
    mean_size, se_size = _mean_se(sizes)
    mean_utility, se_utility = _mean_se(utils)
    return AggregateReport(
        variant=variants.pop(),
        n_trials=len(reports),
        mean_fdp=mean_fdp,
        se_fdp=se_fdp,
        mean_alpha=mean_alpha,
        se_alpha=se_alpha,
        reliability_ratio=ratio,
        se_ratio=se_ratio,
        mean_size=mean_size,
        se_size=se_size,
        mean_utility=mean_utility,
        se_utility=se_utility,
    )
