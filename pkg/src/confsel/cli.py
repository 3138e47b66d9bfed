"""Command-line interface.

Subcommands:

- ``select``   run one selection and write the path + result CSVs
- ``path``     dump the candidate path without committing to a set
- ``simulate`` run a Monte Carlo campaign (synthetic source)
- ``report``   derive histogram/scatter CSVs and figures from a trials CSV

Every config key (see ``--help`` of any subcommand) can be set in a
``key = value`` config file passed via ``--config`` or overridden on
the command line as ``--<dotted.key> <value>``.  Exit codes: 0 success,
2 configuration error, 3 data error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as config_mod
from . import harness
from .conformal import CalibrationScores, EVector, PVector, oracle_e_batch
from .errors import ConfselError
from .metrics import fdp
from .oracle import brute_bh, brute_ebh, check_level_uniform, exact_mean_oracle_e
from .selection import bh_select, ebh_select

PUBLIC_MODES = ("select", "path", "simulate", "report")

_SHORTCUTS = {
    "seed": "run.seed",
    "trials": "run.trials",
    "workers": "run.workers",
    "out": "run.out",
}


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="key = value config file")
    for flag, key in _SHORTCUTS.items():
        parser.add_argument(f"--{flag}", metavar="V", help=f"shortcut for --{key}")
    group = parser.add_argument_group("config key overrides")
    for key in config_mod.KEYS:
        group.add_argument(f"--{key.name}", metavar="V", help=key.help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confsel",
        description="Utility-driven conformal selection with e-variables",
    )
    sub = parser.add_subparsers(dest="mode", required=True, metavar="{%s}" % ",".join(PUBLIC_MODES))
    descriptions = {
        "select": "run one selection and write path/selection/members CSVs",
        "path": "write the candidate path CSV for the configured source",
        "simulate": "run a Monte Carlo campaign and write trial/aggregate/report CSVs",
        "report": "derive histogram and scatter CSVs (and figures) from a trials CSV",
    }
    for mode in PUBLIC_MODES:
        p = sub.add_parser(mode, help=descriptions[mode], description=descriptions[mode])
        _add_config_options(p)
    # undocumented: ad-hoc brute-force reference checks
    oracle_p = sub.add_parser("oracle")
    oracle_p.add_argument(
        "--check",
        choices=("bh", "ebh", "mean_e", "level_uniform", "all"),
        default="all",
    )
    oracle_p.add_argument("--instances", type=int, default=200)
    oracle_p.add_argument("--m", type=int, default=8)
    oracle_p.add_argument("--seed", type=int, default=0)
    return parser


def _collect_overrides(ns: argparse.Namespace) -> dict[str, str]:
    values = vars(ns)
    overrides: dict[str, str] = {}
    for key in config_mod.KEYS:
        raw = values.get(key.name)
        if raw is not None:
            overrides[key.name] = raw
    for flag, key in _SHORTCUTS.items():
        raw = values.get(flag)
        if raw is not None:
            overrides[key] = raw
    return overrides


def _run_oracle_checks(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "ok" if ok else "MISMATCH"
        line = f"oracle {name}: {status}"
        if detail:
            line += f" ({detail})"
        print(line)
        if not ok:
            failures += 1

    if args.check in ("bh", "all"):
        bad = 0
        for _ in range(args.instances):
            p = PVector(rng.uniform(1e-9, 1.0, size=args.m))
            alpha = float(rng.uniform(0.05, 0.95))
            if brute_bh(p, alpha) != bh_select(p, alpha).members:
                bad += 1
        report("bh", bad == 0, f"{args.instances} instances, m={args.m}")
    if args.check in ("ebh", "all"):
        bad = 0
        for _ in range(args.instances):
            e = EVector(rng.exponential(float(args.m), size=args.m))
            alpha = float(rng.uniform(0.05, 0.95))
            if brute_ebh(e, alpha) != ebh_select(e, alpha).members:
                bad += 1
        report("ebh", bad == 0, f"{args.instances} instances, m={args.m}")
    if args.check in ("mean_e", "all"):
        worst = 0.0
        for _ in range(args.instances):
            size = int(rng.integers(2, 51))
            scores = rng.exponential(1.0, size=size)
            worst = max(worst, abs(exact_mean_oracle_e(scores) - 1.0))
        report("mean_e", worst <= 1e-9, f"max |mean - 1| = {worst:.3g}")
    if args.check in ("level_uniform", "all"):
        grid = np.linspace(0.05, 0.95, 19)
        bad = 0
        for _ in range(args.instances):
            cal = CalibrationScores(rng.exponential(1.0, size=30))
            nulls = rng.random(args.m) < 0.5
            true_scores = rng.exponential(1.0, size=args.m)
            hat_scores = np.where(
                nulls, true_scores * rng.random(args.m), true_scores * (1 + rng.random(args.m))
            )
            from .conformal import conformal_e_batch

            e = conformal_e_batch(cal, hat_scores)
            e_star = oracle_e_batch(cal, true_scores)
            if not check_level_uniform(e_star, e, nulls, grid).agreement:
                bad += 1
        report("level_uniform", bad == 0, f"{args.instances} instances, m={args.m}")
    return 4 if failures else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.mode == "oracle":
            return _run_oracle_checks(args)
        cfg = config_mod.build(args.mode, args.config, _collect_overrides(args))
        if args.mode == "select":
            outcome, files = harness.run_select(cfg)
            members = ",".join(str(j) for j in sorted(outcome.members))
            print(
                f"selected variant={outcome.variant} k={outcome.k} size={outcome.size} "
                f"alpha={harness.fmt(outcome.alpha)} members=[{members}]"
            )
            for f in files:
                print(f"wrote {f}")
        elif args.mode == "path":
            for f in harness.run_path(cfg):
                print(f"wrote {f}")
        elif args.mode == "simulate":
            result = harness.run_campaign(cfg)
            for agg in result.aggregates:
                print(
                    f"variant {agg.variant}: n={agg.n_trials} "
                    f"mean_size={harness.fmt(agg.mean_size)} "
                    f"empirical_fdr={harness.fmt(agg.mean_fdp)} "
                    f"mean_alpha={harness.fmt(agg.mean_alpha)} "
                    f"reliability_ratio={harness.fmt(agg.reliability_ratio)}"
                )
            for f in result.files:
                print(f"wrote {f}")
        else:  # report
            for f in harness.run_report(cfg):
                print(f"wrote {f}")
    except ConfselError as exc:
        print(f"confsel: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
