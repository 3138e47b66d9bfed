"""Conformity scores built from model predictions.

A conformity score S(x, y) is a non-negative statistic measuring the
evidence that the true outcome for input x exceeds the level y.  Every
score family here is monotone non-increasing in y, which is the property
the downstream selection guarantees rely on.  Three families are
provided:

- ``clipped_odds``: a piecewise-constant score that equals the prediction
  odds ratio raised to a power ``gamma`` when y is at or below the target
  threshold, and a small floor ``delta`` above it.  The floor shrinks the
  e-value denominator for calibration points that met the requirement,
  boosting the evidence for promising test inputs.
- ``hinge``: max(mu - y, 0).
- ``exponential``: exp(mu - y).

Predictions enter as values in (0, 1); raw regression outputs are mapped
there by min-max normalization against the training-split range and
clamped away from {0, 1} so the odds ratio stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

SCORE_KINDS = ("clipped_odds", "hinge", "exponential")

#: Clamp margin keeping predictions inside (0, 1); with the default
#: gamma values the largest reachable odds ratio stays finite.
DEFAULT_EPS = 1e-6

#: Floor for the clipped_odds score above the threshold.
DEFAULT_DELTA = 1e-6

#: Default exponent for synthetic-regression predictions.
DEFAULT_GAMMA_SYNTHETIC = 3.0

#: Default exponent for ingested (already calibrated) predictions.
DEFAULT_GAMMA_INGESTED = 50.0


@dataclass(frozen=True)
class ScoreSpec:
    """Parameterization of the conformity score family.

    ``norm_min``/``norm_max`` are the prediction range observed on the
    training split and are only consulted when ``normalize`` is set.
    """

    kind: str = "clipped_odds"
    gamma: float = DEFAULT_GAMMA_SYNTHETIC
    delta: float = DEFAULT_DELTA
    eps: float = DEFAULT_EPS
    normalize: bool = False
    norm_min: float | None = None
    norm_max: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCORE_KINDS:
            raise ConfigError(f"unknown score kind {self.kind!r}; expected one of {SCORE_KINDS}")
        if not self.gamma > 0:
            raise ConfigError(f"score gamma must be positive, got {self.gamma}")
        if not self.delta > 0:
            raise ConfigError(f"score delta must be positive, got {self.delta}")
        if not 0 < self.eps < 0.5:
            raise ConfigError(f"score eps must lie in (0, 0.5), got {self.eps}")
        if self.normalize:
            if self.norm_min is None or self.norm_max is None:
                raise ConfigError("normalization enabled but norm_min/norm_max not set")
            if not self.norm_min < self.norm_max:
                raise ConfigError(
                    f"normalization bounds must satisfy norm_min < norm_max, "
                    f"got [{self.norm_min}, {self.norm_max}]"
                )

    def with_bounds(self, norm_min: float, norm_max: float) -> "ScoreSpec":
        """Copy of this spec with normalization enabled at the given range."""
        return ScoreSpec(
            kind=self.kind,
            gamma=self.gamma,
            delta=self.delta,
            eps=self.eps,
            normalize=True,
            norm_min=float(norm_min),
            norm_max=float(norm_max),
        )


def normalize_prediction(raw: float, spec: ScoreSpec) -> float:
    """Map a raw model output into (0, 1) by min-max normalization.

    Values outside the training range are clamped to [eps, 1 - eps]
    rather than rejected; out-of-range test predictions are expected.
    """
    if not math.isfinite(raw):
        raise DataError(f"prediction is not finite: {raw!r}")
    if spec.norm_min is None or spec.norm_max is None or not spec.norm_min < spec.norm_max:
        raise ConfigError("normalize_prediction requires norm_min < norm_max")
    unit = (raw - spec.norm_min) / (spec.norm_max - spec.norm_min)
    return float(min(max(unit, spec.eps), 1.0 - spec.eps))


def clamp_prediction(raw: float, spec: ScoreSpec) -> float:
    """Clamp an already-unit-scale prediction to [eps, 1 - eps]."""
    if not math.isfinite(raw):
        raise DataError(f"prediction is not finite: {raw!r}")
    return float(min(max(raw, spec.eps), 1.0 - spec.eps))


def _check_mu(mu: float) -> None:
    if not (0.0 < mu < 1.0):
        raise DataError(f"prediction must lie strictly inside (0, 1), got {mu}")


def score_value(spec: ScoreSpec, mu: float, y: float, threshold: float) -> float:
    """Conformity score for prediction ``mu`` at response level ``y``.

    ``threshold`` is the target level the selection asks about; only the
    clipped_odds family consults it (the score drops to ``delta`` as soon
    as y exceeds the threshold, with equality kept on the high branch).
    """
    _check_mu(mu)
    if not math.isfinite(y):
        raise DataError(f"response level must be finite, got {y!r}")
    if spec.kind == "clipped_odds":
        if y <= threshold:
            s = (mu / (1.0 - mu)) ** spec.gamma
            if not math.isfinite(s):
                raise DataError(
                    f"clipped_odds score overflowed at mu={mu}, gamma={spec.gamma}; "
                    "increase eps or decrease gamma"
                )
            return s
        return spec.delta
    if spec.kind == "hinge":
        return max(mu - y, 0.0)
    # exponential
    return math.exp(mu - y)


def score_at_threshold(spec: ScoreSpec, mu: float, c: float) -> float:
    """Score evaluated exactly at the target threshold, S(x, c).

    For clipped_odds the y <= c branch applies since the comparison is
    inclusive.
    """
    return score_value(spec, mu, c, c)


def score_batch(
    spec: ScoreSpec, mus: np.ndarray, ys: np.ndarray, thresholds: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`score_value` over aligned arrays."""
    mus = np.asarray(mus, dtype=float)
    ys = np.asarray(ys, dtype=float)
    thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float), mus.shape)
    if mus.shape != ys.shape:
        raise DataError(f"prediction/response shape mismatch: {mus.shape} vs {ys.shape}")
    out = np.empty_like(mus)
    for i in range(mus.size):
        out.flat[i] = score_value(spec, float(mus.flat[i]), float(ys.flat[i]), float(thresholds.flat[i]))
    return out
