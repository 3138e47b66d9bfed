"""Selection procedures: BH, e-BH, the candidate path, and utility argmax.

The candidate path is the backbone of post-hoc selection.  Sorting the
e-variables as E_(1) >= ... >= E_(m) yields the nested family

    R_k = {j : E_j >= E_(k)},   k = 0, 1, ..., m   (R_0 = the empty set)

which exhausts every set an e-BH run at any level could output.  Each
entry carries the data-driven FDP estimate

    alpha_hat(R_k) = min{1, m / (k * E_(k))},

the level at which e-BH would have stopped exactly at that entry.  The
post-hoc driver picks the entry maximizing a user utility over
(set size, alpha_hat) and reports that entry's estimate, which is what
the mean reliability bound E[FDP / alpha] <= 1 certifies, uniformly over
any data-dependent choice along the path.

Indices are 0-based positions in the test batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformal import CalibrationScores, EVector, PVector, conformal_e_batch
from .errors import ConfigError, DataError, InternalCheckError
from .utility import UtilitySpec, evaluate, tie_preference

VARIANTS = ("cs", "ebh_fixed", "ph_cs", "ph_rcs", "ph_rcs_weighted")


@dataclass(frozen=True)
class PathEntry:
    """One candidate set: index k, order statistic E_(k), members, alpha_hat."""

    k: int
    order_stat: float | None
    members: frozenset[int]
    alpha_hat: float


@dataclass(frozen=True)
class SelectionPath:
    """The nested candidate family R_0 through R_m with FDP estimates."""

    entries: tuple[PathEntry, ...]
    m: int

    def __post_init__(self) -> None:
        if len(self.entries) != self.m + 1:
            raise InternalCheckError("path must hold exactly m + 1 entries")
        first = self.entries[0]
        if first.k != 0 or first.members or first.alpha_hat != 0.0:
            raise InternalCheckError("path entry 0 must be (k=0, empty, alpha=0)")
        prev_stat = np.inf
        for k, entry in enumerate(self.entries):
            if entry.k != k:
                raise InternalCheckError("path entries must be indexed 0..m")
            if not 0.0 <= entry.alpha_hat <= 1.0:
                raise InternalCheckError("alpha_hat must lie in [0, 1]")
            if entry.order_stat is not None:
                if entry.order_stat > prev_stat:
                    raise InternalCheckError("order statistics must be non-increasing")
                prev_stat = entry.order_stat

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SelectionOutcome:
    """A selected set with its declared FDP level.

    ``alpha`` is the level the procedure certifies: the path estimate at
    the chosen entry for post-hoc variants, the pre-specified target for
    the fixed-level baselines.  ``utility_value`` is None when no
    utility was involved.
    """

    members: frozenset[int]
    alpha: float
    k: int
    utility_value: float | None
    variant: str

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def size(self) -> int:
        return len(self.members)


def _check_level(alpha: float, name: str) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"{name} must lie strictly inside (0, 1), got {alpha}")


def bh_select(p: PVector, alpha_max: float) -> SelectionOutcome:
    """Step-up BH selection of p-variables at a fixed target level.

    The level must be chosen before looking at the data for the FDR
    guarantee to apply; that discipline is the caller's responsibility.
    """
    _check_level(alpha_max, "alpha_max")
    vals = p.values
    m = len(vals)
    sorted_vals = np.sort(vals)
    ks = np.arange(1, m + 1)
    feasible = sorted_vals <= alpha_max * ks / m
    k_star = int(ks[feasible].max()) if np.any(feasible) else 0
    if k_star == 0:
        members: frozenset[int] = frozenset()
    else:
        members = frozenset(np.flatnonzero(vals <= alpha_max * k_star / m).tolist())
    return SelectionOutcome(
        members=members, alpha=alpha_max, k=k_star, utility_value=None, variant="cs"
    )


def ebh_select(e: EVector, alpha: float) -> SelectionOutcome:
    """e-BH selection at a fixed level: largest k with k * E_(k) >= m / alpha.

    The output is self-consistent: every member's e-variable clears the
    threshold m / (alpha * |R|) and no non-member's does.
    """
    _check_level(alpha, "alpha")
    vals = e.values
    m = len(vals)
    sorted_desc = np.sort(vals)[::-1]
    ks = np.arange(1, m + 1)
    feasible = ks * sorted_desc >= m / alpha
    k_star = int(ks[feasible].max()) if np.any(feasible) else 0
    if k_star == 0:
        members: frozenset[int] = frozenset()
    else:
        members = frozenset(np.flatnonzero(vals >= sorted_desc[k_star - 1]).tolist())
    return SelectionOutcome(
        members=members, alpha=alpha, k=k_star, utility_value=None, variant="ebh_fixed"
    )


def build_path(e: EVector) -> SelectionPath:
    """Construct the full candidate path R_0 .. R_m from an e-vector.

    Ties in the e-values can make consecutive member sets coincide; an
    entry is still emitted for every k, and alpha_hat keeps k (not the
    member count) in its denominator.  A zero order statistic clamps the
    estimate to 1.
    """
    vals = e.values
    m = len(vals)
    sorted_desc = np.sort(vals)[::-1]
    entries = [PathEntry(k=0, order_stat=None, members=frozenset(), alpha_hat=0.0)]
    for k in range(1, m + 1):
        stat = float(sorted_desc[k - 1])
        members = frozenset(np.flatnonzero(vals >= stat).tolist())
        alpha_hat = 1.0 if stat <= 0.0 else min(1.0, m / (k * stat))
        entries.append(PathEntry(k=k, order_stat=stat, members=members, alpha_hat=alpha_hat))
    return SelectionPath(entries=tuple(entries), m=m)


def maximize_utility(
    path: SelectionPath, u: UtilitySpec, variant: str = "ph_cs"
) -> SelectionOutcome:
    """Pick the path entry maximizing U(|R_k|, alpha_hat_k).

    Exact ties fall back to the utility kind's preference (the
    constrained-size design keeps entries meeting the size requirement
    ahead of those that do not) and then to the smallest k — the
    smallest set and hence typically the smallest declared level.  The
    chosen entry's alpha_hat becomes the declared level of the outcome.
    """
    best_entry = path.entries[0]
    best_value = evaluate(u, len(best_entry.members), best_entry.alpha_hat)
    best_pref = tie_preference(u, len(best_entry.members), best_entry.alpha_hat)
    for entry in path.entries[1:]:
        value = evaluate(u, len(entry.members), entry.alpha_hat)
        pref = tie_preference(u, len(entry.members), entry.alpha_hat)
        if value > best_value or (value == best_value and pref > best_pref):
            best_entry, best_value, best_pref = entry, value, pref
    return SelectionOutcome(
        members=best_entry.members,
        alpha=best_entry.alpha_hat,
        k=best_entry.k,
        utility_value=best_value,
        variant=variant,
    )


def path_utilities(path: SelectionPath, u: UtilitySpec) -> np.ndarray:
    """Utility at every path entry, in k order (used for path dumps)."""
    return np.array([evaluate(u, len(en.members), en.alpha_hat) for en in path.entries])


def ph_cs(
    cal_scores, test_scores, u: UtilitySpec
) -> tuple[SelectionOutcome, SelectionPath]:
    """Post-hoc conformal selection from scores: e-variables, path, argmax."""
    cal = cal_scores if isinstance(cal_scores, CalibrationScores) else CalibrationScores(cal_scores)
    e = conformal_e_batch(cal, test_scores)
    path = build_path(e)
    outcome = maximize_utility(path, u, variant="ph_cs")
    return outcome, path


def ph_rcs(e_g: EVector, u: UtilitySpec) -> tuple[SelectionOutcome, SelectionPath]:
    """Post-hoc risk-controlled selection on externally supplied e-variables.

    The caller is responsible for the mean risk constraint
    E[L_j * E_j] <= 1; the binary-loss reduction and weighting helpers
    in :mod:`confsel.conformal` produce conforming inputs.  The outcome
    records whether weighted e-variables were used.
    """
    if e_g.kind == "oracle":
        raise DataError("oracle e-variables must not drive selection")
    variant = "ph_rcs_weighted" if e_g.kind == "weighted" else "ph_rcs"
    path = build_path(e_g)
    outcome = maximize_utility(path, u, variant=variant)
    return outcome, path
