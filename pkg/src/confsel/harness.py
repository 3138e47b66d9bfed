"""End-to-end drivers: single selections, path dumps, Monte Carlo
campaigns, and report emission.

A campaign runs independent trials, each on its own (seed, trial)
substream: generate data, fit the configured predictor, score, select,
and measure the realized error against the withheld labels.  The
matched CS baseline is a second pass over the same per-trial datasets —
the level it needs is the campaign mean of the declared levels, which
is only known after the first pass — and regenerated batches are
digest-checked against the first pass to prove the replay is exact.

All output files are CSV with floats rendered at 12 significant
digits, so identical configurations produce byte-identical outputs
regardless of worker count.
"""

from __future__ import annotations

import csv
import hashlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import plots
from .config import RunConfig
from .conformal import (
    CalibrationScores,
    EVector,
    WeightVector,
    conformal_e_batch,
    conformal_p_batch,
    weighted_e,
)
from .datasim import (
    LabeledBatch,
    fit_knn,
    fit_ridge,
    gen_synthetic,
    load_predictions,
    substream,
)
from .errors import ConfigError, DataError, InternalCheckError
from .metrics import TrialReport, aggregate, generalized_fdp, fdp, taylor_gap
from .scoring import clamp_prediction, normalize_prediction, score_at_threshold, score_value
from .selection import (
    SelectionOutcome,
    SelectionPath,
    bh_select,
    build_path,
    ebh_select,
    maximize_utility,
    path_utilities,
    ph_rcs,
)
from .utility import evaluate

TRIALS_HEADER = ("trial_id", "variant", "set_size", "declared_alpha", "realized_fdp", "realized_utility", "seed")
AGGREGATE_HEADER = (
    "variant", "n_trials", "mean_fdp", "se_fdp", "mean_alpha", "se_alpha",
    "reliability_ratio", "se_ratio", "mean_size", "se_size", "mean_utility", "se_utility",
)
PATH_HEADER = ("k", "order_stat", "set_size", "alpha_hat", "utility", "chosen")
SCATTER_HEADER = ("realized_fdp", "declared_alpha")
HIST_HEADER = ("variant", "value", "count")


def fmt(x) -> str:
    """Float rendering used in every CSV: 12 significant digits."""
    return format(float(x), ".12g")


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# Per-trial pipeline (synthetic source)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialData:
    """One trial's regenerable inputs plus a digest proving the replay."""

    train: LabeledBatch
    cal: LabeledBatch
    test: LabeledBatch
    tiebreaks: np.ndarray
    weights: np.ndarray
    digest: str


def make_trial_data(cfg: RunConfig, trial: int) -> TrialData:
    """Draw everything a trial can consume, in a fixed stream order.

    Tie-break draws and weights are drawn whether or not the variant
    uses them, so the stream layout (and hence the data) is identical
    across variants and passes.
    """
    rng = substream(cfg.seed, trial)
    train, cal, test = gen_synthetic(cfg.sim, rng)
    tiebreaks = rng.random(cfg.sim.m)
    w_raw = rng.random(cfg.sim.m)
    if cfg.weights_mode == "random":
        weights = w_raw * (cfg.sim.m / w_raw.sum())
    else:
        weights = np.ones(cfg.sim.m)
    digest = hashlib.sha256()
    for batch in (train, cal, test):
        digest.update(batch.covariates.tobytes())
        digest.update(batch.responses.tobytes())
    digest.update(tiebreaks.tobytes())
    digest.update(weights.tobytes())
    return TrialData(
        train=train, cal=cal, test=test, tiebreaks=tiebreaks, weights=weights,
        digest=digest.hexdigest(),
    )


@dataclass(frozen=True)
class TrialInputs:
    """Scores and ground truth for one trial, ready for any variant."""

    cal_scores: CalibrationScores
    test_scores: np.ndarray
    oracle_scores: np.ndarray
    nulls: np.ndarray
    tiebreaks: np.ndarray
    weights: np.ndarray
    digest: str


def prepare_inputs(cfg: RunConfig, data: TrialData) -> TrialInputs:
    if cfg.model == "knn":
        model = fit_knn(data.train, k=cfg.knn_k)
    else:
        model = fit_ridge(data.train, reg=cfg.ridge_reg)
    preds_train = model.predict(data.train.covariates)
    spec = cfg.score
    if cfg.score_normalize:
        lo, hi = float(preds_train.min()), float(preds_train.max())
        if not lo < hi:
            raise DataError("training predictions are constant; cannot min-max normalize")
        spec = spec.with_bounds(lo, hi)
        to_unit = partial(normalize_prediction, spec=spec)
    else:
        to_unit = partial(clamp_prediction, spec=spec)
    c = cfg.sim.c
    mu_cal = [to_unit(float(v)) for v in model.predict(data.cal.covariates)]
    mu_test = [to_unit(float(v)) for v in model.predict(data.test.covariates)]
    cal_scores = CalibrationScores(
        np.array([score_value(spec, mu, float(y), c) for mu, y in zip(mu_cal, data.cal.responses)])
    )
    test_scores = np.array([score_at_threshold(spec, mu, c) for mu in mu_test])
    oracle_scores = np.array(
        [score_value(spec, mu, float(y), c) for mu, y in zip(mu_test, data.test.responses)]
    )
    nulls = data.test.responses <= c
    return TrialInputs(
        cal_scores=cal_scores,
        test_scores=test_scores,
        oracle_scores=oracle_scores,
        nulls=nulls,
        tiebreaks=data.tiebreaks,
        weights=data.weights,
        digest=data.digest,
    )


def _posthoc_evector(cfg: RunConfig, inputs: TrialInputs) -> EVector:
    if cfg.variant == "ph_cs":
        return conformal_e_batch(inputs.cal_scores, inputs.test_scores)
    # risk-control variants: binary-loss reduction of the risk-adjusted
    # construction, optionally weighted under the budget
    e = conformal_e_batch(inputs.cal_scores, inputs.test_scores, kind="risk_adjusted")
    if cfg.variant == "ph_rcs_weighted":
        return weighted_e(e, WeightVector(inputs.weights))
    return e


def _select_posthoc(cfg: RunConfig, inputs: TrialInputs) -> tuple[SelectionOutcome, SelectionPath]:
    if cfg.variant == "ph_cs":
        e = _posthoc_evector(cfg, inputs)
        path = build_path(e)
        return maximize_utility(path, cfg.utility, variant="ph_cs"), path
    return ph_rcs(_posthoc_evector(cfg, inputs), cfg.utility)


def run_posthoc_trial(cfg: RunConfig, trial: int) -> tuple[TrialReport, str]:
    """Pass-1 worker: post-hoc selection on trial data, measured on labels."""
    inputs = prepare_inputs(cfg, make_trial_data(cfg, trial))
    outcome, _ = _select_posthoc(cfg, inputs)
    losses = inputs.nulls.astype(float)
    realized = generalized_fdp(outcome.members, losses)
    report = TrialReport(
        trial_id=trial,
        set_size=outcome.size,
        declared_alpha=outcome.alpha,
        realized_fdp=realized,
        realized_utility=evaluate(cfg.utility, outcome.size, realized),
        variant=cfg.variant,
        seed=cfg.seed,
    )
    return report, inputs.digest


def run_cs_trial(cfg: RunConfig, alpha_max: float, trial: int) -> tuple[TrialReport, str]:
    """Pass-2 worker: fixed-level CS baseline on the same trial data."""
    inputs = prepare_inputs(cfg, make_trial_data(cfg, trial))
    p = conformal_p_batch(inputs.cal_scores, inputs.test_scores, inputs.tiebreaks)
    outcome = bh_select(p, alpha_max)
    realized = fdp(outcome.members, inputs.nulls)
    report = TrialReport(
        trial_id=trial,
        set_size=outcome.size,
        declared_alpha=alpha_max,
        realized_fdp=realized,
        realized_utility=evaluate(cfg.utility, outcome.size, realized),
        variant="cs",
        seed=cfg.seed,
    )
    return report, inputs.digest


def _map_trials(cfg: RunConfig, func, trials) -> list:
    if cfg.workers == 1:
        return [func(t) for t in trials]
    chunk = max(1, len(trials) // (4 * cfg.workers))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(func, trials, chunksize=chunk))


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CampaignResult:
    reports: tuple[TrialReport, ...]
    aggregates: tuple
    cs_alpha_max: float | None
    files: tuple[Path, ...]


def run_campaign(cfg: RunConfig) -> CampaignResult:
    """Monte Carlo campaign, optionally with the matched CS baseline."""
    if cfg.variant not in ("ph_cs", "ph_rcs", "ph_rcs_weighted"):
        raise ConfigError(f"simulate drives post-hoc variants, not {cfg.variant!r}")
    trials = list(range(cfg.n_trials))
    pass1 = _map_trials(cfg, partial(run_posthoc_trial, cfg), trials)
    ph_reports = [rep for rep, _ in pass1]
    digests = {t: d for t, (_, d) in zip(trials, pass1)}

    cs_alpha: float | None = None
    cs_reports: list[TrialReport] = []
    if cfg.cs_alpha_max is not None:
        if cfg.cs_alpha_max == "matched":
            cs_alpha = float(np.mean([r.declared_alpha for r in ph_reports]))
        else:
            cs_alpha = float(cfg.cs_alpha_max)
        # BH needs a level strictly inside (0, 1); a degenerate campaign
        # mean is clamped rather than aborting the baseline
        cs_alpha = min(max(cs_alpha, 1e-12), 1.0 - 1e-12)
        pass2 = _map_trials(cfg, partial(run_cs_trial, cfg, cs_alpha), trials)
        for t, (rep, digest) in zip(trials, pass2):
            if digest != digests[t]:
                raise InternalCheckError(
                    f"trial {t}: replayed data digest mismatch between passes"
                )
            cs_reports.append(rep)

    reports = tuple(sorted(ph_reports + cs_reports, key=lambda r: (r.variant, r.trial_id)))
    by_variant = {}
    for rep in reports:
        by_variant.setdefault(rep.variant, []).append(rep)
    aggregates = tuple(aggregate(rs) for _, rs in sorted(by_variant.items()))

    files = [
        _write_csv(
            cfg.out_dir / "trials.csv",
            TRIALS_HEADER,
            [
                (r.trial_id, r.variant, r.set_size, fmt(r.declared_alpha),
                 fmt(r.realized_fdp), fmt(r.realized_utility), r.seed)
                for r in reports
            ],
        ),
        _write_csv(
            cfg.out_dir / "aggregate.csv",
            AGGREGATE_HEADER,
            [_aggregate_row(a) for a in aggregates],
        ),
    ]
    files.extend(emit_reports(reports, cfg.out_dir))
    files.append(_write_summary(cfg, aggregates, reports, cs_alpha))
    return CampaignResult(
        reports=reports, aggregates=aggregates, cs_alpha_max=cs_alpha, files=tuple(files)
    )


def _aggregate_row(a) -> tuple:
    return (
        a.variant, a.n_trials, fmt(a.mean_fdp), fmt(a.se_fdp), fmt(a.mean_alpha),
        fmt(a.se_alpha), fmt(a.reliability_ratio), fmt(a.se_ratio), fmt(a.mean_size),
        fmt(a.se_size), fmt(a.mean_utility), fmt(a.se_utility),
    )


def _write_summary(cfg: RunConfig, aggregates, reports, cs_alpha) -> Path:
    lines = [
        f"campaign: variant={cfg.variant} trials={cfg.n_trials} seed={cfg.seed}",
        f"source: synthetic n_train={cfg.sim.n_train} n_cal={cfg.sim.n_cal} "
        f"m={cfg.sim.m} noise={cfg.sim.noise} c={fmt(cfg.sim.c)} model={cfg.model}",
        f"score: kind={cfg.score.kind} gamma={fmt(cfg.score.gamma)} delta={fmt(cfg.score.delta)}",
        f"utility: kind={cfg.utility.kind} r_min={cfg.utility.r_min} lambda={fmt(cfg.utility.lam)}",
    ]
    if cs_alpha is not None:
        matched = " (matched to campaign mean declared level)" if cfg.cs_alpha_max == "matched" else ""
        lines.append(f"cs baseline: alpha_max={fmt(cs_alpha)}{matched}")
    for a in aggregates:
        lines.append(
            f"variant {a.variant}: n={a.n_trials} mean_size={fmt(a.mean_size)} "
            f"mean_alpha={fmt(a.mean_alpha)} (se {fmt(a.se_alpha)}) "
            f"empirical_fdr={fmt(a.mean_fdp)} (se {fmt(a.se_fdp)}) "
            f"reliability_ratio={fmt(a.reliability_ratio)} (se {fmt(a.se_ratio)}) "
            f"mean_utility={fmt(a.mean_utility)} (se {fmt(a.se_utility)})"
        )
    posthoc = [r for r in reports if r.variant.startswith("ph_")]
    if posthoc:
        gap = taylor_gap(posthoc)
        lines.append(
            f"declared-vs-realized gap: mean_alpha={fmt(gap['mean_alpha'])} "
            f"empirical_fdr={fmt(gap['mean_fdp'])} gap={fmt(gap['gap'])}"
        )
    out = cfg.out_dir / "summary.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


# ---------------------------------------------------------------------------
# Report emission (histogram / scatter CSVs; figures in report mode)
# ---------------------------------------------------------------------------


def _hist_rows(reports, value_of) -> list[tuple]:
    counts: Counter = Counter((r.variant, value_of(r)) for r in reports)
    rows = []
    for (variant, value), count in sorted(counts.items()):
        rows.append((variant, fmt(value), count))
    return rows


def emit_reports(reports, out_dir: Path, include_figures: bool = False) -> list[Path]:
    """Histogram and scatter CSVs; optionally rendered figures alongside.

    Histograms count exact values (binning is a presentation choice);
    the scatter pairs each post-hoc trial's realized FDP with its
    declared level.
    """
    out_dir = Path(out_dir)
    posthoc = [r for r in reports if r.variant.startswith("ph_")]
    files = [
        _write_csv(out_dir / "size_hist.csv", HIST_HEADER, _hist_rows(reports, lambda r: r.set_size)),
        _write_csv(out_dir / "fdp_hist.csv", HIST_HEADER, _hist_rows(reports, lambda r: r.realized_fdp)),
        _write_csv(
            out_dir / "utility_hist.csv", HIST_HEADER, _hist_rows(reports, lambda r: r.realized_utility)
        ),
        _write_csv(
            out_dir / "scatter.csv",
            SCATTER_HEADER,
            [(fmt(r.realized_fdp), fmt(r.declared_alpha)) for r in posthoc],
        ),
    ]
    if include_figures:
        files.extend(plots.render_report_figures(reports, out_dir))
    return files


def load_trials_csv(path) -> list[TrialReport]:
    """Read a per-trial CSV back into reports (for report mode)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"trials file not found: {path}")
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRIALS_HEADER:
            raise DataError(f"{path}: expected header {','.join(TRIALS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRIALS_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(TRIALS_HEADER)} fields")
            try:
                reports.append(
                    TrialReport(
                        trial_id=int(row[0]),
                        variant=row[1],
                        set_size=int(row[2]),
                        declared_alpha=float(row[3]),
                        realized_fdp=float(row[4]),
                        realized_utility=float(row[5]),
                        seed=int(row[6]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return reports


def run_report(cfg: RunConfig) -> list[Path]:
    """Re-derive aggregate, histogram and scatter outputs from a trials CSV."""
    trials_path = cfg.report_trials or (cfg.out_dir / "trials.csv")
    reports = load_trials_csv(trials_path)
    if not reports:
        raise DataError(f"{trials_path}: no trial rows")
    by_variant: dict[str, list[TrialReport]] = {}
    for rep in reports:
        by_variant.setdefault(rep.variant, []).append(rep)
    aggregates = [aggregate(rs) for _, rs in sorted(by_variant.items())]
    files = [
        _write_csv(cfg.out_dir / "aggregate.csv", AGGREGATE_HEADER, [_aggregate_row(a) for a in aggregates])
    ]
    files.extend(emit_reports(reports, cfg.out_dir, include_figures=cfg.report_figures))
    return files


# ---------------------------------------------------------------------------
# Single selections and path dumps
# ---------------------------------------------------------------------------


def _file_run(cfg: RunConfig):
    """Score ingested predictions and run the configured variant once."""
    cal, test = load_predictions(cfg.cal_file, cfg.test_file)
    spec = cfg.score
    mu_cal = [clamp_prediction(float(v), spec) for v in cal.mu]
    mu_test = [clamp_prediction(float(v), spec) for v in test.mu]
    cal_scores = CalibrationScores(
        np.array([score_value(spec, mu, float(y), float(c)) for mu, y, c in zip(mu_cal, cal.y, cal.c)])
    )
    test_scores = np.array(
        [score_at_threshold(spec, mu, float(c)) for mu, c in zip(mu_test, test.c)]
    )
    m = len(test)
    if cfg.utility.kind == "constrained_size" and cfg.utility.r_min > m:
        raise ConfigError(f"utility.r_min = {cfg.utility.r_min} exceeds the test batch size m = {m}")

    path: SelectionPath | None = None
    if cfg.variant == "cs":
        rng = substream(cfg.seed, 0)
        p = conformal_p_batch(cal_scores, test_scores, rng.random(m))
        outcome = bh_select(p, cfg.alpha)
    elif cfg.variant == "ebh_fixed":
        e = conformal_e_batch(cal_scores, test_scores)
        outcome = ebh_select(e, cfg.alpha)
        path = build_path(e)
    elif cfg.variant == "ph_cs":
        e = conformal_e_batch(cal_scores, test_scores)
        path = build_path(e)
        outcome = maximize_utility(path, cfg.utility, variant="ph_cs")
    else:
        if test.e_g is not None:
            e = EVector(test.e_g, kind="risk_adjusted")
        else:
            e = conformal_e_batch(cal_scores, test_scores, kind="risk_adjusted")
        if cfg.variant == "ph_rcs_weighted":
            if test.w is None:
                raise DataError("variant ph_rcs_weighted requires a w column in the test CSV")
            e = weighted_e(e, WeightVector(test.w))
        outcome, path = ph_rcs(e, cfg.utility)
    return outcome, path


def _sim_run(cfg: RunConfig):
    inputs = prepare_inputs(cfg, make_trial_data(cfg, 0))
    if cfg.variant == "cs":
        p = conformal_p_batch(inputs.cal_scores, inputs.test_scores, inputs.tiebreaks)
        return bh_select(p, cfg.alpha), None
    if cfg.variant == "ebh_fixed":
        e = conformal_e_batch(inputs.cal_scores, inputs.test_scores)
        return ebh_select(e, cfg.alpha), build_path(e)
    return _select_posthoc(cfg, inputs)


def write_path_csv(
    path: SelectionPath, cfg: RunConfig, out: Path, chosen_k: int | None
) -> Path:
    utilities = path_utilities(path, cfg.utility)
    rows = []
    for entry, util in zip(path.entries, utilities):
        rows.append(
            (
                entry.k,
                "" if entry.order_stat is None else fmt(entry.order_stat),
                len(entry.members),
                fmt(entry.alpha_hat),
                fmt(util),
                1 if entry.k == chosen_k else 0,
            )
        )
    return _write_csv(out, PATH_HEADER, rows)


def run_select(cfg: RunConfig) -> tuple[SelectionOutcome, list[Path]]:
    """One selection on the configured source; writes path + result CSVs."""
    outcome, path = _file_run(cfg) if cfg.source == "file" else _sim_run(cfg)
    files = []
    if path is not None:
        files.append(write_path_csv(path, cfg, cfg.out_dir / "path.csv", outcome.k))
    files.append(
        _write_csv(
            cfg.out_dir / "selection.csv",
            ("variant", "k", "set_size", "alpha", "utility"),
            [(
                outcome.variant,
                outcome.k,
                outcome.size,
                fmt(outcome.alpha),
                "" if outcome.utility_value is None else fmt(outcome.utility_value),
            )],
        )
    )
    files.append(
        _write_csv(cfg.out_dir / "members.csv", ("index",), [(j,) for j in sorted(outcome.members)])
    )
    return outcome, files


def run_path(cfg: RunConfig) -> list[Path]:
    """Dump the candidate path without committing to a selection."""
    if cfg.variant == "cs":
        raise ConfigError("variant cs has no candidate path; use an e-variable variant")
    outcome, path = _file_run(cfg) if cfg.source == "file" else _sim_run(cfg)
    if path is None:
        raise InternalCheckError("e-variable variant produced no path")
    return [write_path_csv(path, cfg, cfg.out_dir / "path.csv", outcome.k)]
