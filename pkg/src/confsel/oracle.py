"""Brute-force reference implementations for validating the main paths.

Everything here re-derives its answer by explicit enumeration, sharing
no logic with :mod:`confsel.selection`: agreement between the two is
evidence of correctness rather than a tautology.  The checks are:

- step-up selections recomputed by scanning every candidate index and
  counting threshold crossings directly;
- the exact mean-one identity of the oracle e-variable, evaluated by
  averaging over all n+1 assignments of the test role in a score
  multiset;
- the level-uniform bound FDP(level) / level <= mean oracle e-value,
  checked on a grid of levels against realized selections.

Performance is a non-goal; everything may be quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformal import CalibrationScores, EVector, PVector, oracle_e
from .errors import DataError
from .metrics import fdp
from .selection import ebh_select

#: Relative tolerance for the mean-one identity.
MEAN_E_TOL = 1e-9

#: Slack absorbing float rounding in the otherwise deterministic
#: level-uniform inequality.
LEVEL_UNIFORM_RTOL = 1e-9


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one reference check: what was compared, and how it went."""

    instance: str
    main_result: object
    oracle_result: object
    agreement: bool
    detail: str = ""


def brute_bh(p: PVector, alpha_max: float) -> frozenset[int]:
    """BH by direct enumeration: for each k, count p-values under the line."""
    if not 0.0 < alpha_max < 1.0:
        raise DataError(f"alpha_max must lie in (0, 1), got {alpha_max}")
    vals = p.values
    m = len(vals)
    k_star = 0
    for k in range(1, m + 1):
        threshold = alpha_max * k / m
        if sum(1 for v in vals if v <= threshold) >= k:
            k_star = k
    if k_star == 0:
        return frozenset()
    cutoff = alpha_max * k_star / m
    return frozenset(j for j, v in enumerate(vals) if v <= cutoff)


def brute_ebh(e: EVector, alpha: float) -> frozenset[int]:
    """e-BH by direct enumeration, with the self-consistency membership check.

    For each k the threshold m / (alpha * k) is applied and the count of
    clearing e-values compared to k; the returned set is then verified
    to satisfy j in R iff E_j >= m / (alpha * |R|), which must hold by
    construction.
    """
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    vals = e.values
    m = len(vals)
    k_star = 0
    for k in range(1, m + 1):
        threshold = m / (alpha * k)
        if sum(1 for v in vals if v >= threshold) >= k:
            k_star = k
    if k_star == 0:
        return frozenset()
    cutoff = m / (alpha * k_star)
    selected = frozenset(j for j, v in enumerate(vals) if v >= cutoff)
    consistency_cut = m / (alpha * len(selected))
    for j, v in enumerate(vals):
        if (j in selected) != (v >= consistency_cut):
            raise DataError(
                f"self-consistency violated at index {j}: e={v!r}, "
                f"threshold={consistency_cut!r}, |R|={len(selected)}"
            )
    return selected


def exact_mean_oracle_e(scores) -> float:
    """Average oracle e-value over all assignments of the test role.

    For any fixed multiset of n+1 non-negative scores with positive sum,
    letting each element play the test unit in turn and averaging gives
    exactly 1 — the finite, deterministic form of the mean-one identity.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DataError("need at least two scores")
    if arr.sum() <= 0.0:
        raise DataError("all-zero score multiset: the mean identity is undefined")
    doubled = np.concatenate([arr, arr])
    n_plus_1 = arr.size
    total = 0.0
    for i in range(n_plus_1):
        cal = CalibrationScores(doubled[i + 1 : i + n_plus_1])
        total += oracle_e(cal, float(arr[i]))
    return total / n_plus_1


def check_level_uniform(
    e_oracle: EVector, e: EVector, nulls, alpha_grid
) -> OracleReport:
    """Check FDP(R(alpha)) / alpha <= mean(oracle e) on a grid of levels.

    The bound is deterministic whenever the feasible e-variable is
    dominated by the oracle one under each true null; the report flags
    the first violating level if any.
    """
    if e_oracle.kind != "oracle":
        raise DataError("first argument must be an oracle-kind e-vector")
    nulls = np.asarray(nulls, dtype=bool)
    if len(e) != len(e_oracle) or nulls.size != len(e):
        raise DataError("e-vectors and null flags must share the batch size")
    bound = float(e_oracle.values.mean())
    worst_ratio = 0.0
    for alpha in np.asarray(alpha_grid, dtype=float):
        members = ebh_select(e, float(alpha)).members
        ratio = fdp(members, nulls) / float(alpha)
        worst_ratio = max(worst_ratio, ratio)
        if ratio > bound * (1.0 + LEVEL_UNIFORM_RTOL) + LEVEL_UNIFORM_RTOL:
            return OracleReport(
                instance=f"m={len(e)}, grid of {np.size(alpha_grid)} levels",
                main_result=ratio,
                oracle_result=bound,
                agreement=False,
                detail=f"violated at alpha={float(alpha)!r}: FDP/alpha={ratio!r} > {bound!r}",
            )
    return OracleReport(
        instance=f"m={len(e)}, grid of {np.size(alpha_grid)} levels",
        main_result=worst_ratio,
        oracle_result=bound,
        agreement=True,
    )
