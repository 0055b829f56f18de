"""Figure rendering from harness result CSVs.

Seven figure families: panel figures (ratio / utilization band / acceptance
rate, one column per pricing aggressiveness) for the stochastic sweeps,
growth curves for the hard-instance sweeps, and the minimal-gamma curve for
the cost case. Rendering is a pure function of the input bytes: fixed
in-repo style, raster output, no timestamps or version strings in the image.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "legend.fontsize": 8,
}

PANEL_FIGURES = {"E2", "E3", "E4", "E5"}
HARD_FIGURES = {"E6", "E7"}
COST_FIGURES = {"E8"}

_GAMMA_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]


class SchemaError(ValueError):
    """An input CSV lacks a column the requested figure needs."""


@dataclass
class FigureSpec:
    figure: str
    inputs: list[str]
    out: str
    overlay: str | None = None
    log_x: bool = False
    title: str = ""


def load_rows(path: str | Path) -> list[dict]:
    """Rows of a harness CSV; leading comment lines are skipped."""
    text = Path(path).read_text()
    data_lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not data_lines:
        return []
    return list(csv.DictReader(io.StringIO("\n".join(data_lines))))


def require_columns(rows: list[dict], needed: list[str], path: str) -> None:
    if not rows:
        return
    have = set(rows[0])
    for col in needed:
        if col not in have:
            raise SchemaError(f"input CSV {path} is missing required column '{col}'")


def _f(row: dict, col: str) -> float:
    v = row[col]
    return math.nan if v == "" else float(v)


def _gamma_labels(rows: list[dict]) -> list[str]:
    labels = sorted({r["gamma_label"] for r in rows}, key=lambda s: (len(s), s))
    # numeric labels ascending, symbolic ones (e.g. the order-optimal pick) last
    numeric = sorted((l for l in labels if _is_float(l)), key=float)
    return numeric + [l for l in labels if not _is_float(l)]


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _sweep_column(rows: list[dict]) -> str:
    counts = {col: len({r[col] for r in rows}) for col in ("M", "m", "p_bar")}
    return max(counts, key=lambda c: (counts[c], c == "M"))


def _group_mean(rows: list[dict], x_col: str, y_col: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x, mean(y), sample sd(y) per x, rows with empty/inf y dropped."""
    groups: dict[float, list[float]] = {}
    for r in rows:
        y = _f(r, y_col)
        if math.isnan(y) or math.isinf(y):
            continue
        groups.setdefault(_f(r, x_col), []).append(y)
    xs = np.array(sorted(groups))
    means = np.array([np.mean(np.sort(groups[x])) for x in xs])
    sds = np.array([np.std(np.sort(groups[x]), ddof=1) if len(groups[x]) > 1 else 0.0 for x in xs])
    return xs, means, sds


def _empty_figure(spec: FigureSpec) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.annotate(
        "no data rows in input CSV",
        xy=(0.5, 0.5),
        xycoords="axes fraction",
        ha="center",
        fontsize=11,
        color="#b00000",
    )
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, spec)


def _save(fig, spec: FigureSpec) -> Path:
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    # strip the default Software tag so bytes depend on inputs only
    fig.savefig(out, format="png", metadata={"Software": None})
    plt.close(fig)
    return out


def render(spec: FigureSpec) -> Path:
    """Write one raster image for the requested figure and return its path."""
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(load_rows(path))
    with plt.rc_context(STYLE):
        if not rows:
            return _empty_figure(spec)
        fig_id = spec.figure.upper()
        if fig_id in PANEL_FIGURES:
            return _render_panels(spec, rows)
        if fig_id == "E6":
            return _render_line_hard(spec, rows)
        if fig_id == "E7":
            return _render_tree_hard(spec, rows)
        if fig_id in COST_FIGURES:
            return _render_cost(spec, rows)
        raise SchemaError(f"unknown figure id {spec.figure!r}")


def _render_panels(spec: FigureSpec, rows: list[dict]) -> Path:
    path = spec.inputs[0]
    require_columns(
        rows,
        ["gamma_label", "ratio", "acceptance_rate", "alg_util_min", "alg_util_mean",
         "alg_util_max", "opt_util_min", "opt_util_mean", "opt_util_max", "m", "M", "p_bar"],
        path,
    )
    x_col = _sweep_column(rows)
    labels = _gamma_labels(rows)
    fig, axes = plt.subplots(
        3, len(labels), figsize=(3.2 * len(labels), 7.2), sharex=True, squeeze=False
    )
    overlay = load_rows(spec.overlay) if spec.overlay else []
    for j, label in enumerate(labels):
        sub = [r for r in rows if r["gamma_label"] == label]
        ax_ratio, ax_util, ax_acc = axes[0][j], axes[1][j], axes[2][j]

        xs, mean, sd = _group_mean(sub, x_col, "ratio")
        ax_ratio.plot(xs, mean, marker="o", color=_GAMMA_COLORS[0], label="empirical ratio")
        ax_ratio.fill_between(xs, mean - sd, mean + sd, alpha=0.2, color=_GAMMA_COLORS[0])
        if overlay:
            require_columns(overlay, [x_col, "bound"], spec.overlay)
            o = [r for r in overlay if r.get("gamma_label", label) == label]
            if o:
                ox, om, _ = _group_mean(o, x_col, "bound")
                ax_ratio.plot(ox, om, linestyle="--", color="#444444", label="bound")
        ax_ratio.set_title(f"gamma = {label}")
        if j == 0:
            ax_ratio.set_ylabel("ratio OPT/ALG")
            ax_ratio.legend()

        for prefix, color, name in (("alg", _GAMMA_COLORS[1], "online"),
                                    ("opt", _GAMMA_COLORS[2], "offline")):
            xs, lo, _ = _group_mean(sub, x_col, f"{prefix}_util_min")
            _, mid, _ = _group_mean(sub, x_col, f"{prefix}_util_mean")
            _, hi, _ = _group_mean(sub, x_col, f"{prefix}_util_max")
            ax_util.fill_between(xs, lo, hi, alpha=0.15, color=color)
            ax_util.plot(xs, mid, marker=".", color=color, label=name)
        ax_util.set_ylim(-0.02, 1.05)
        if j == 0:
            ax_util.set_ylabel("utilization (min/mean/max)")
            ax_util.legend()

        xs, acc, sd = _group_mean(sub, x_col, "acceptance_rate")
        ax_acc.plot(xs, acc, marker="s", color=_GAMMA_COLORS[3])
        ax_acc.fill_between(xs, acc - sd, acc + sd, alpha=0.2, color=_GAMMA_COLORS[3])
        ax_acc.set_ylim(-0.02, 1.05)
        ax_acc.set_xlabel(x_col)
        if j == 0:
            ax_acc.set_ylabel("acceptance rate")
        if spec.log_x:
            ax_acc.set_xscale("log")
    fig.suptitle(spec.title or f"{spec.figure}: sweep over {x_col}")
    fig.tight_layout()
    return _save(fig, spec)


def _render_line_hard(spec: FigureSpec, rows: list[dict]) -> Path:
    require_columns(rows, ["gamma_label", "ratio", "m", "M"], spec.inputs[0])
    for r in rows:
        r["_mm"] = repr(_f(r, "M") / max(_f(r, "m"), 1.0))
    fig, ax = plt.subplots(figsize=(4.9, 3.6))
    for k, label in enumerate(_gamma_labels(rows)):
        sub = [r for r in rows if r["gamma_label"] == label]
        xs, mean, _ = _group_mean(sub, "_mm", "ratio")
        ax.plot(xs, mean, marker="o", color=_GAMMA_COLORS[k % len(_GAMMA_COLORS)],
                label=f"gamma = {label}")
    ax.set_xlabel("path length variation M/m")
    ax.set_ylabel("ratio OPT/ALG")
    ax.set_xscale("log", base=2)
    ax.legend()
    fig.suptitle(spec.title or "hard line instances")
    fig.tight_layout()
    return _save(fig, spec)


def _render_tree_hard(spec: FigureSpec, rows: list[dict]) -> Path:
    require_columns(rows, ["gamma_label", "ratio", "m", "M"], spec.inputs[0])
    max_M = max(_f(r, "M") for r in rows)
    min_m = min(_f(r, "m") for r in rows)
    panel_a = [r for r in rows if _f(r, "M") == max_M]
    panel_b = [r for r in rows if _f(r, "m") == min_m]
    fig, (ax_a, ax_b) = plt.subplots(1, 2, figsize=(8.2, 3.6))
    for k, label in enumerate(_gamma_labels(rows)):
        color = _GAMMA_COLORS[k % len(_GAMMA_COLORS)]
        xs, mean, _ = _group_mean([r for r in panel_a if r["gamma_label"] == label], "m", "ratio")
        ax_a.plot(xs, mean, marker="o", color=color, label=f"gamma = {label}")
        xs, mean, _ = _group_mean([r for r in panel_b if r["gamma_label"] == label], "M", "ratio")
        ax_b.plot(xs, mean, marker="o", color=color, label=f"gamma = {label}")
    ax_a.set_xlabel(f"m (M = {max_M:g})")
    ax_b.set_xlabel(f"M (m = {min_m:g})")
    for ax in (ax_a, ax_b):
        ax.set_ylabel("ratio OPT/ALG")
        ax.legend()
    fig.suptitle(spec.title or "hard tree instances")
    fig.tight_layout()
    return _save(fig, spec)


def _render_cost(spec: FigureSpec, rows: list[dict]) -> Path:
    require_columns(rows, ["p_bar", "min_gamma"], spec.inputs[0])
    fig, ax = plt.subplots(figsize=(4.9, 3.6))
    xs, mean, _ = _group_mean(rows, "p_bar", "min_gamma")
    ax.plot(xs, mean, marker="o", color=_GAMMA_COLORS[0])
    ax.set_xlabel("maximum value density")
    ax.set_ylabel("best competitive ratio")
    if spec.log_x:
        ax.set_xscale("log", base=2)
    fig.suptitle(spec.title or "cost case: minimal feasible aggressiveness")
    fig.tight_layout()
    return _save(fig, spec)
