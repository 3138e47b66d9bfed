"""Declarative utilities over (set size, FDP estimate).

A utility U(r, alpha) expresses the user's trade-off between selecting
more units (non-decreasing in r) and keeping the estimated error
proportion low (non-increasing in alpha).  Four kinds:

- ``constrained_size``: (1 - alpha) * 1{r >= r_min} — prefer the lowest
  error level among sets meeting a minimum size.
- ``additive``: u(r) - lambda * v(alpha) + c, with u and v optionally
  tabulated (defaults u(r) = r and v(alpha) = alpha).
- ``linear_tradeoff``: r - lambda * alpha.
- ``log_tradeoff``: log(r) - lambda * log(1 / (1 - alpha)); the
  undefined endpoints r = 0 and alpha = 1 evaluate to -inf so the
  argmax never lands on them unless every candidate does.

The domain is deliberately the closed interval [0, 1] in alpha and
r >= 0, so the empty-set and clamped-estimate entries of a candidate
path are always evaluable.  Utilities may be negative; nothing in the
selection guarantee depends on the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

UTILITY_KINDS = ("constrained_size", "additive", "linear_tradeoff", "log_tradeoff")


def _check_table(table, name: str) -> tuple[float, ...] | None:
    if table is None:
        return None
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ConfigError(f"{name} must hold at least two values")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    if np.any(np.diff(arr) < 0):
        raise ConfigError(f"{name} must be non-decreasing")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class UtilitySpec:
    """One utility function, ready to evaluate at any path entry.

    ``u_table`` tabulates u(r) at r = 0, 1, ... (the last value extends
    to larger sets); ``v_table`` tabulates v(alpha) on a uniform grid
    over [0, 1] and is interpolated linearly.  Both must be
    non-decreasing, which keeps the overall monotonicity contract.
    """

    kind: str = "constrained_size"
    r_min: int = 0
    lam: float = 0.0
    offset_c: float = 0.0
    u_table: tuple[float, ...] | None = None
    v_table: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in UTILITY_KINDS:
            raise ConfigError(f"unknown utility kind {self.kind!r}; expected one of {UTILITY_KINDS}")
        if self.r_min < 0:
            raise ConfigError(f"r_min must be >= 0, got {self.r_min}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.offset_c < 0:
            raise ConfigError(f"offset c must be >= 0, got {self.offset_c}")
        object.__setattr__(self, "u_table", _check_table(self.u_table, "u_table"))
        object.__setattr__(self, "v_table", _check_table(self.v_table, "v_table"))

    def _u_of_r(self, r: int) -> float:
        if self.u_table is None:
            return float(r)
        return self.u_table[min(r, len(self.u_table) - 1)]

    def _v_of_alpha(self, alpha: float) -> float:
        if self.v_table is None:
            return alpha
        grid = np.linspace(0.0, 1.0, len(self.v_table))
        return float(np.interp(alpha, grid, self.v_table))


def evaluate(u: UtilitySpec, r: int, alpha: float) -> float:
    """Utility value at set size ``r`` and FDP estimate ``alpha``."""
    if r < 0:
        raise DataError(f"set size must be >= 0, got {r}")
    if not 0.0 <= alpha <= 1.0:
        raise DataError(f"alpha must lie in [0, 1], got {alpha}")
    if u.kind == "constrained_size":
        return (1.0 - alpha) if r >= u.r_min else 0.0
    if u.kind == "additive":
        return u._u_of_r(r) - u.lam * u._v_of_alpha(alpha) + u.offset_c
    if u.kind == "linear_tradeoff":
        return float(r) - u.lam * alpha
    # log_tradeoff: -inf sentinels at the undefined endpoints
    if r == 0 or alpha >= 1.0:
        return -math.inf
    return math.log(r) - u.lam * math.log(1.0 / (1.0 - alpha))


def tie_preference(u: UtilitySpec, r: int, alpha: float) -> int:
    """Secondary key used only to order exact ties of the utility value.

    The constrained-size design exists to enforce a minimum size, so
    among equally scored candidates the ones meeting the requirement
    win — this is what keeps the chosen set at r >= r_min even when
    every qualifying entry's estimate clamps to 1 and the utility
    flattens to 0.  The other kinds express no preference.
    """
    if u.kind == "constrained_size":
        return 1 if r >= u.r_min else 0
    return 0
