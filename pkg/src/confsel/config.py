"""Run configuration: dotted flat keys, a small config-file parser, and
CLI override plumbing.

A configuration is a flat mapping from dotted keys (score.*, utility.*,
sim.*, data.*, run.*, report.*) to typed values.  Files hold one
``key = value`` pair per line with ``#`` comments; every key can also be
set on the command line as ``--<dotted.key> value``.  Precedence is
defaults < file < command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .datasim import NOISE_KINDS, SyntheticConfig
from .errors import ConfigError
from .scoring import (
    DEFAULT_DELTA,
    DEFAULT_EPS,
    DEFAULT_GAMMA_INGESTED,
    DEFAULT_GAMMA_SYNTHETIC,
    SCORE_KINDS,
    ScoreSpec,
)
from .selection import VARIANTS
from .utility import UTILITY_KINDS, UtilitySpec

WEIGHT_MODES = ("none", "random")
MODEL_KINDS = ("knn", "ridge")


@dataclass(frozen=True)
class KeyDef:
    name: str
    kind: str  # int | float | str | bool | float_or_none | float_list | level
    default: object
    help: str


KEYS: tuple[KeyDef, ...] = (
    KeyDef("run.seed", "int", 0, "master seed; trial t uses substream (seed, t)"),
    KeyDef("run.trials", "int", 100, "number of Monte Carlo trials for simulate"),
    KeyDef("run.workers", "int", 1, "concurrent trial workers"),
    KeyDef("run.out", "str", "out", "output directory"),
    KeyDef("run.variant", "str", "ph_cs", f"selection variant, one of {VARIANTS}"),
    KeyDef("run.alpha", "float", 0.1, "fixed level for the cs / ebh_fixed variants"),
    KeyDef(
        "run.cs_alpha_max",
        "level",
        None,
        "CS baseline level for simulate: a number, 'matched' (campaign mean of "
        "declared levels), or 'none' to skip the baseline",
    ),
    KeyDef("sim.n_train", "int", 1000, "training sample size"),
    KeyDef("sim.n_cal", "int", 1000, "calibration sample size"),
    KeyDef("sim.m", "int", 100, "test batch size"),
    KeyDef("sim.noise", "str", "homoscedastic", f"noise model, one of {NOISE_KINDS}"),
    KeyDef("sim.sigma0", "float", 0.15, "homoscedastic noise standard deviation"),
    KeyDef("sim.het_scale", "float", 0.1, "heteroscedastic noise scale factor"),
    KeyDef("sim.c", "float", 0.0, "quality threshold shared by all test units"),
    KeyDef("sim.model", "str", "knn", f"built-in predictor, one of {MODEL_KINDS}"),
    KeyDef("sim.knn_k", "int", 10, "neighbor count for the knn predictor"),
    KeyDef("sim.ridge_reg", "float", 1e-6, "L2 penalty for the ridge predictor"),
    KeyDef("sim.weights", "str", "none", f"per-trial priority weights, one of {WEIGHT_MODES}"),
    KeyDef("data.cal_file", "str", "", "calibration prediction CSV (file source)"),
    KeyDef("data.test_file", "str", "", "test prediction CSV (file source)"),
    KeyDef("score.kind", "str", "clipped_odds", f"score family, one of {SCORE_KINDS}"),
    KeyDef(
        "score.gamma",
        "float_or_none",
        None,
        "score exponent; defaults to 3 for the synthetic source, 50 for files",
    ),
    KeyDef("score.delta", "float", DEFAULT_DELTA, "clip floor above the threshold"),
    KeyDef("score.eps", "float", DEFAULT_EPS, "prediction clamp margin"),
    KeyDef(
        "score.normalize",
        "bool_or_none",
        None,
        "min-max normalize predictions against the training range; defaults to "
        "true for the synthetic source, false for files",
    ),
    KeyDef("utility.kind", "str", "constrained_size", f"utility, one of {UTILITY_KINDS}"),
    KeyDef("utility.r_min", "int", 0, "minimum set size (constrained_size)"),
    KeyDef("utility.lambda", "float", 0.0, "trade-off weight"),
    KeyDef("utility.c", "float", 0.0, "additive offset"),
    KeyDef("utility.u_table", "float_list", None, "tabulated u(r) values at r = 0, 1, ..."),
    KeyDef("utility.v_table", "float_list", None, "tabulated v(alpha) on a uniform [0, 1] grid"),
    KeyDef("report.trials", "str", "", "trials CSV to report on (default <out>/trials.csv)"),
    KeyDef("report.figures", "bool", True, "render figures next to the report CSVs"),
)

KEY_INDEX = {k.name: k for k in KEYS}

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(key: KeyDef, raw: str):
    text = raw.strip()
    try:
        if key.kind == "int":
            return int(text)
        if key.kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if key.kind == "str":
            return text
        if key.kind in ("bool", "bool_or_none"):
            if text.lower() in _BOOL_WORDS:
                return _BOOL_WORDS[text.lower()]
            raise ValueError
        if key.kind == "float_or_none":
            if text.lower() in ("", "none"):
                return None
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if key.kind == "float_list":
            if text.lower() in ("", "none"):
                return None
            return tuple(float(part) for part in text.split(","))
        if key.kind == "level":
            if text.lower() in ("", "none"):
                return None
            if text.lower() == "matched":
                return "matched"
            value = float(text)
            if not 0.0 < value < 1.0:
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"invalid value for {key.name}: {raw!r}") from None
    raise ConfigError(f"unhandled key kind {key.kind!r} for {key.name}")


def default_values() -> dict[str, object]:
    return {k.name: k.default for k in KEYS}


def parse_config_file(path) -> dict[str, object]:
    """Parse a flat key = value config file into typed values."""
    values: dict[str, object] = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        name, _, raw = stripped.partition("=")
        name = name.strip()
        if name not in KEY_INDEX:
            raise ConfigError(f"{path}:{lineno}: unknown config key {name!r}")
        values[name] = _convert(KEY_INDEX[name], raw)
    return values


def apply_overrides(values: dict[str, object], overrides: dict[str, str]) -> None:
    for name, raw in overrides.items():
        if name not in KEY_INDEX:
            raise ConfigError(f"unknown config key {name!r}")
        values[name] = _convert(KEY_INDEX[name], raw)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one CLI invocation."""

    mode: str
    source: str  # "sim" | "file"
    seed: int
    n_trials: int
    workers: int
    out_dir: Path
    variant: str
    alpha: float
    cs_alpha_max: object  # None | "matched" | float
    sim: SyntheticConfig
    model: str
    knn_k: int
    ridge_reg: float
    weights_mode: str
    cal_file: str
    test_file: str
    score: ScoreSpec
    score_normalize: bool
    utility: UtilitySpec
    report_trials: str
    report_figures: bool


def resolve(mode: str, values: dict[str, object]) -> RunConfig:
    """Validate a key mapping and build the typed run configuration."""
    file_source = bool(values["data.cal_file"]) or bool(values["data.test_file"])
    if file_source and not (values["data.cal_file"] and values["data.test_file"]):
        raise ConfigError("file source requires both data.cal_file and data.test_file")
    source = "file" if file_source else "sim"
    if mode == "simulate" and source != "sim":
        raise ConfigError("simulate requires the synthetic source (labels are needed)")

    variant = str(values["run.variant"])
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    seed = int(values["run.seed"])
    if seed < 0:
        raise ConfigError("run.seed must be non-negative")
    n_trials = int(values["run.trials"])
    if mode == "simulate" and n_trials < 1:
        raise ConfigError("run.trials must be >= 1")
    workers = int(values["run.workers"])
    if workers < 1:
        raise ConfigError("run.workers must be >= 1")

    gamma = values["score.gamma"]
    if gamma is None:
        gamma = DEFAULT_GAMMA_SYNTHETIC if source == "sim" else DEFAULT_GAMMA_INGESTED
    normalize = values["score.normalize"]
    if normalize is None:
        normalize = source == "sim"
    if normalize and source == "file":
        raise ConfigError(
            "score.normalize requires a training split; file sources must supply "
            "predictions already on the unit scale"
        )
    score = ScoreSpec(
        kind=str(values["score.kind"]),
        gamma=float(gamma),
        delta=float(values["score.delta"]),
        eps=float(values["score.eps"]),
    )

    utility = UtilitySpec(
        kind=str(values["utility.kind"]),
        r_min=int(values["utility.r_min"]),
        lam=float(values["utility.lambda"]),
        offset_c=float(values["utility.c"]),
        u_table=values["utility.u_table"],
        v_table=values["utility.v_table"],
    )

    model = str(values["sim.model"])
    if model not in MODEL_KINDS:
        raise ConfigError(f"unknown sim.model {model!r}; expected one of {MODEL_KINDS}")
    weights_mode = str(values["sim.weights"])
    if weights_mode not in WEIGHT_MODES:
        raise ConfigError(f"unknown sim.weights {weights_mode!r}; expected one of {WEIGHT_MODES}")
    if variant == "ph_rcs_weighted" and source == "sim" and weights_mode == "none":
        raise ConfigError("variant ph_rcs_weighted with the synthetic source needs sim.weights=random")

    sim = SyntheticConfig(
        n_train=int(values["sim.n_train"]),
        n_cal=int(values["sim.n_cal"]),
        m=int(values["sim.m"]),
        noise=str(values["sim.noise"]),
        sigma0=float(values["sim.sigma0"]),
        het_scale=float(values["sim.het_scale"]),
        c=float(values["sim.c"]),
        seed=seed,
    )

    if utility.kind == "constrained_size" and source == "sim" and utility.r_min > sim.m:
        raise ConfigError(
            f"utility.r_min = {utility.r_min} exceeds the test batch size m = {sim.m}"
        )

    return RunConfig(
        mode=mode,
        source=source,
        seed=seed,
        n_trials=n_trials,
        workers=workers,
        out_dir=Path(str(values["run.out"])),
        variant=variant,
        alpha=float(values["run.alpha"]),
        cs_alpha_max=values["run.cs_alpha_max"],
        sim=sim,
        model=model,
        knn_k=int(values["sim.knn_k"]),
        ridge_reg=float(values["sim.ridge_reg"]),
        weights_mode=weights_mode,
        cal_file=str(values["data.cal_file"]),
        test_file=str(values["data.test_file"]),
        score=score,
        score_normalize=bool(normalize),
        utility=utility,
        report_trials=str(values["report.trials"]),
        report_figures=bool(values["report.figures"]),
    )


def build(mode: str, config_file=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Defaults, then file, then overrides; validate and resolve."""
    values = default_values()
    if config_file:
        values.update(parse_config_file(config_file))
    if overrides:
        apply_overrides(values, overrides)
    return resolve(mode, values)
