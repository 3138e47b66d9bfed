"""Synthetic data generation, lightweight predictors, and file ingestion.

The synthetic setting draws 20-dimensional covariates with i.i.d.
U([-1, 1]) entries and responses

    Y = f(X) + noise,    f(X) = 5 * (X1 * X2 + exp(X4 - 1)),

with either homoscedastic Gaussian noise (sigma = 0.15) or the
heteroscedastic scale 0.1 * (5.5 - |f(X)|) / 2 (floored at 0, since the
formula goes negative for the largest signal values).  Training,
calibration and test batches are independent draws from the same law,
which is exactly the exchangeability the selection guarantees assume.

Randomness comes from counter-based Philox streams keyed on
(master seed, trial index): trials are independent, replayable, and
insensitive to scheduling order.

The built-in predictors are deliberately small — k-NN and ridge — since
the guarantees are model-agnostic; externally produced predictions can
be ingested from CSV instead for exact replication of a deployed model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.linalg

from .errors import ConfigError, DataError

#: Covariate dimension of the synthetic generator.
SYNTH_DIM = 20

NOISE_KINDS = ("homoscedastic", "heteroscedastic")
BATCH_ROLES = ("train", "calibration", "test")


def substream(master_seed: int, trial: int) -> np.random.Generator:
    """Independent, replayable RNG stream for one trial.

    Keyed counter-based generator: the (seed, trial) pair fully
    determines the stream, so concurrent trials never share state and
    any trial can be regenerated in isolation.
    """
    if master_seed < 0 or trial < 0:
        raise ConfigError("seed and trial index must be non-negative")
    key = np.array([master_seed, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SyntheticConfig:
    """Sizes, noise model and threshold for the synthetic generator."""

    n_train: int = 1000
    n_cal: int = 1000
    m: int = 100
    noise: str = "homoscedastic"
    sigma0: float = 0.15
    het_scale: float = 0.1
    c: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_train", "n_cal", "m"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise!r}; expected one of {NOISE_KINDS}")
        if self.sigma0 < 0 or self.het_scale < 0:
            raise ConfigError("noise scales must be non-negative")


@dataclass(frozen=True)
class LabeledBatch:
    """Covariates with responses; the role records which split this is."""

    covariates: np.ndarray
    responses: np.ndarray
    role: str

    def __post_init__(self) -> None:
        if self.role not in BATCH_ROLES:
            raise DataError(f"unknown batch role {self.role!r}")
        x = np.asarray(self.covariates, dtype=float)
        y = np.asarray(self.responses, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DataError("covariates must be (n, d) aligned with length-n responses")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("batch contains non-finite entries")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "responses", y)

    def __len__(self) -> int:
        return int(self.responses.size)


def signal(x: np.ndarray) -> np.ndarray:
    """Noise-free response surface 5 * (X1 * X2 + exp(X4 - 1))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return 5.0 * (x[:, 0] * x[:, 1] + np.exp(x[:, 3] - 1.0))


def _draw_batch(cfg: SyntheticConfig, rng: np.random.Generator, n: int, role: str) -> LabeledBatch:
    x = rng.uniform(-1.0, 1.0, size=(n, SYNTH_DIM))
    f = signal(x)
    if cfg.noise == "homoscedastic":
        eps = rng.normal(0.0, cfg.sigma0, size=n)
    else:
        scale = np.maximum(cfg.het_scale * (5.5 - np.abs(f)) / 2.0, 0.0)
        eps = rng.normal(0.0, 1.0, size=n) * scale
    return LabeledBatch(covariates=x, responses=f + eps, role=role)


def gen_synthetic(
    cfg: SyntheticConfig, rng: np.random.Generator
) -> tuple[LabeledBatch, LabeledBatch, LabeledBatch]:
    """Independent train / calibration / test batches from one stream.

    Draw order is fixed (train, calibration, test), so a given stream
    always reproduces the same triple bit for bit.
    """
    train = _draw_batch(cfg, rng, cfg.n_train, "train")
    cal = _draw_batch(cfg, rng, cfg.n_cal, "calibration")
    test = _draw_batch(cfg, rng, cfg.m, "test")
    return train, cal, test


class KnnModel:
    """Mean response of the k nearest training points (Euclidean)."""

    def __init__(self, train_x: np.ndarray, train_y: np.ndarray, k: int):
        self.train_x = train_x
        self.train_y = train_y
        self.k = k

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = (
            np.sum(x**2, axis=1)[:, None]
            - 2.0 * x @ self.train_x.T
            + np.sum(self.train_x**2, axis=1)[None, :]
        )
        k, n = self.k, self.train_x.shape[0]
        if k == n:
            return np.full(x.shape[0], self.train_y.mean())
        # k smallest per row without a full sort; ties at the boundary
        # distance are resolved by training index
        boundary = np.partition(d2, k - 1, axis=1)[:, k - 1 : k]
        within = d2 <= boundary
        counts = within.sum(axis=1)
        totals = (self.train_y[None, :] * within).sum(axis=1)
        for i in np.flatnonzero(counts > k):
            strict = d2[i] < boundary[i, 0]
            surplus_tied = np.flatnonzero(d2[i] == boundary[i, 0])[k - int(strict.sum()) :]
            totals[i] -= self.train_y[surplus_tied].sum()
        return totals / k


class RidgeModel:
    """Linear model with L2-penalized coefficients and a free intercept."""

    def __init__(self, coef: np.ndarray, intercept: float):
        self.coef = coef
        self.intercept = intercept

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ self.coef + self.intercept


def fit_knn(train: LabeledBatch, k: int = 10) -> KnnModel:
    """k-NN regressor on the training batch."""
    if len(train) == 0:
        raise DataError("cannot fit k-NN on an empty training set")
    if not 1 <= k <= len(train):
        raise ConfigError(f"k must lie in [1, {len(train)}], got {k}")
    return KnnModel(train.covariates, train.responses, k)


def fit_ridge(train: LabeledBatch, reg: float = 0.0) -> RidgeModel:
    """Ridge regression via the normal equations and a Cholesky solve.

    The intercept column is left unpenalized.  With reg = 0 a rank-
    deficient design makes the normal matrix lose positive definiteness.
    """
    if reg < 0:
        raise ConfigError(f"ridge penalty must be >= 0, got {reg}")
    if len(train) == 0:
        raise DataError("cannot fit ridge on an empty training set")
    x = train.covariates
    n, d = x.shape
    xa = np.hstack([np.ones((n, 1)), x])
    a = xa.T @ xa
    penalty = np.full(d + 1, reg)
    penalty[0] = 0.0
    a[np.diag_indices_from(a)] += penalty
    b = xa.T @ train.responses
    try:
        beta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(a), b)
    except np.linalg.LinAlgError as exc:
        raise DataError(
            "normal equations are singular; the design is rank-deficient — "
            "set a positive ridge penalty (reg > 0)"
        ) from exc
    return RidgeModel(coef=beta[1:], intercept=float(beta[0]))


# ---------------------------------------------------------------------------
# CSV ingestion of externally produced predictions
# ---------------------------------------------------------------------------

#: Calibration file headers: classifier mode carries binary labels with
#: an implied threshold of 0, regression mode carries responses and
#: per-row thresholds.
CAL_HEADERS = (("mu", "label"), ("mu", "y", "c"))

#: Required test columns; y enables labeled evaluation, e_g supplies
#: external risk-adjusted e-variables, w supplies priority weights.
TEST_REQUIRED = ("mu", "c")
TEST_OPTIONAL = ("y", "e_g", "w")


@dataclass(frozen=True)
class PredictionRecords:
    """Parsed per-row prediction inputs for one split."""

    mu: np.ndarray
    c: np.ndarray
    y: np.ndarray | None = None
    e_g: np.ndarray | None = None
    w: np.ndarray | None = None
    classifier_mode: bool = False

    def __len__(self) -> int:
        return int(self.mu.size)


def _content_rows(path) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            yield lineno, [cell.strip() for cell in row]


def _parse_float(cell: str, path, lineno: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {col!r} is not a number: {cell!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{lineno}: column {col!r} is not finite: {cell!r}")
    return value


def _load_table(path, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> tuple[dict[str, np.ndarray], tuple[str, ...]]:
    rows = _content_rows(path)
    try:
        header_line, header = next(rows)
    except StopIteration:
        raise DataError(f"{path}: file has no header row") from None
    for col in required:
        if col not in header:
            raise DataError(
                f"{path}:{header_line}: missing required column {col!r} (header is {header})"
            )
    for col in header:
        if col not in required and col not in optional:
            raise DataError(f"{path}:{header_line}: unexpected column {col!r}")
    columns: dict[str, list[float]] = {col: [] for col in header}
    for lineno, row in rows:
        if len(row) != len(header):
            raise DataError(
                f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
            )
        for col, cell in zip(header, row):
            columns[col].append(_parse_float(cell, path, lineno, col))
    return {col: np.array(vals) for col, vals in columns.items()}, tuple(header)


def load_predictions(cal_file, test_file) -> tuple[PredictionRecords, PredictionRecords]:
    """Parse and validate prediction CSVs for calibration and test splits.

    Calibration format: header ``mu,label`` (classifier mode, labels in
    {0, 1}, threshold 0) or ``mu,y,c`` (regression mode).  Test format:
    header ``mu,c`` plus optional ``y``, ``e_g``, ``w`` columns.  Lines
    starting with ``#`` are ignored; errors carry the offending line
    number.
    """
    cal_cols, cal_header = _load_table(cal_file, ("mu",), ("label", "y", "c"))
    classifier = "label" in cal_header
    if classifier:
        if set(cal_header) != {"mu", "label"}:
            raise DataError(f"{cal_file}: classifier mode requires exactly the columns mu,label")
        labels = cal_cols["label"]
        if not np.all(np.isin(labels, (0.0, 1.0))):
            raise DataError(f"{cal_file}: classifier labels must be 0 or 1")
        if np.any(cal_cols["mu"] < 0.0) or np.any(cal_cols["mu"] > 1.0):
            raise DataError(f"{cal_file}: classifier predictions must lie in [0, 1]")
        cal = PredictionRecords(
            mu=cal_cols["mu"],
            c=np.zeros_like(labels),
            y=labels,
            classifier_mode=True,
        )
    else:
        if not {"y", "c"} <= set(cal_header):
            raise DataError(
                f"{cal_file}: calibration header must be mu,label or mu,y,c (got {list(cal_header)})"
            )
        cal = PredictionRecords(mu=cal_cols["mu"], c=cal_cols["c"], y=cal_cols["y"])
    if len(cal) == 0:
        raise DataError(f"{cal_file}: no calibration rows")

    test_cols, test_header = _load_table(test_file, TEST_REQUIRED, TEST_OPTIONAL)
    if classifier and (np.any(test_cols["mu"] < 0.0) or np.any(test_cols["mu"] > 1.0)):
        raise DataError(f"{test_file}: classifier predictions must lie in [0, 1]")
    e_g = test_cols.get("e_g")
    if e_g is not None and np.any(e_g < 0.0):
        raise DataError(f"{test_file}: e_g values must be non-negative")
    w = test_cols.get("w")
    if w is not None and np.any(w < 0.0):
        raise DataError(f"{test_file}: weights must be non-negative")
    test = PredictionRecords(
        mu=test_cols["mu"],
        c=test_cols["c"],
        y=test_cols.get("y"),
        e_g=e_g,
        w=w,
        classifier_mode=classifier,
    )
    if len(test) == 0:
        raise DataError(f"{test_file}: no test units")
    return cal, test
