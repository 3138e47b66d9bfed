"""Figure rendering for report outputs.

Renders the same quantities the report CSVs carry: histograms of set
size, realized FDP and realized utility per variant, and the
declared-level versus realized-FDP scatter with its diagonal reference.
Files are written next to the CSVs; the data remains authoritative.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_COLORS = {"cs": "tab:blue", "ebh_fixed": "tab:green"}
_DEFAULT_COLOR = "tab:red"


def _color(variant: str) -> str:
    return _COLORS.get(variant, _DEFAULT_COLOR)


def _finite(values):
    return [v for v in values if math.isfinite(v)]


def _hist_figure(reports, value_of, xlabel: str, out: Path) -> Path:
    by_variant: dict[str, list[float]] = {}
    for rep in reports:
        by_variant.setdefault(rep.variant, []).append(float(value_of(rep)))
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for variant, values in sorted(by_variant.items()):
        finite = _finite(values)
        if not finite:
            continue
        color = _color(variant)
        ax.hist(finite, bins=20, alpha=0.55, label=variant, color=color)
        ax.axvline(sum(finite) / len(finite), color=color, linestyle="--", linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("trials")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _scatter_figure(reports, out: Path) -> Path:
    xs = [r.declared_alpha for r in reports]
    ys = [r.realized_fdp for r in reports]
    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    ax.scatter(xs, ys, s=14, alpha=0.6, color=_DEFAULT_COLOR, edgecolors="none")
    lim = max([0.05] + xs + ys) * 1.05
    ax.plot([0, lim], [0, lim], "k--", linewidth=1.0)
    if xs:
        ax.axvline(sum(xs) / len(xs), color=_DEFAULT_COLOR, linestyle=":", linewidth=1.2)
        ax.axhline(sum(ys) / len(ys), color="tab:blue", linestyle=":", linewidth=1.2)
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel("declared level")
    ax.set_ylabel("realized FDP")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_report_figures(reports, out_dir: Path) -> list[Path]:
    """PNG companions to the report CSVs; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [
        _hist_figure(reports, lambda r: r.set_size, "selected set size", out_dir / "size_hist.png"),
        _hist_figure(reports, lambda r: r.realized_fdp, "realized FDP", out_dir / "fdp_hist.png"),
        _hist_figure(
            reports, lambda r: r.realized_utility, "realized utility", out_dir / "utility_hist.png"
        ),
    ]
    posthoc = [r for r in reports if r.variant.startswith("ph_")]
    if posthoc:
        files.append(_scatter_figure(posthoc, out_dir / "scatter.png"))
    return files
