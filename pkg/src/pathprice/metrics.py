"""Quantities reported per experiment cell: ratio, utilization, acceptance.

Pure reducers; aggregation is permutation-invariant. Infinite ratios (the
online algorithm earned nothing while the optimum is positive) are counted,
never averaged.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ValidationError
from .mechanism import RunReport
from .offline import OptResult, PackingProblem
from .topology import Network


@dataclass
class ExperimentPoint:
    experiment: str = ""
    figure: str = ""
    topology: str = ""
    pattern: str = ""
    gamma: float = math.nan
    gamma_label: str = ""
    m: int = 0
    M: int = 0
    p_bar: float = math.nan
    seed: int = 0
    n_requests: int = 0
    ratio: float = math.nan
    ratio_is_inf: bool = False
    alg_welfare: float = math.nan
    opt_value: float = math.nan
    opt_exact: bool = False
    opt_gap: float = 0.0
    acceptance_rate: float = math.nan
    alg_util_min: float = math.nan
    alg_util_mean: float = math.nan
    alg_util_max: float = math.nan
    opt_util_min: float = math.nan
    opt_util_mean: float = math.nan
    opt_util_max: float = math.nan
    eps_ok: bool = False
    min_gamma: float = math.nan
    residual_max: float = math.nan
    delta_sensitivity: float = math.nan
    extra: dict = field(default_factory=dict, repr=False)


CSV_COLUMNS = [f.name for f in fields(ExperimentPoint) if f.name != "extra"]


def empirical_ratio(run: RunReport, opt: OptResult) -> float:
    """OPT value over online welfare; 0/0 is 1 and x/0 is the +inf sentinel."""
    if run.alg_welfare < 0 and run.cost_total == 0:
        raise ValidationError(f"negative welfare {run.alg_welfare} in a no-cost run")
    if run.alg_welfare == 0:
        return 1.0 if opt.value == 0 else math.inf
    return opt.value / run.alg_welfare


def utilization_stats(utilization: np.ndarray, net: Network) -> tuple[float, float, float]:
    """(min, mean, max) of per-edge utilization against capacity."""
    rho = np.asarray(utilization, dtype=float) / np.array(net.capacities)
    return float(np.min(rho)), float(np.mean(rho)), float(np.max(rho))


def selection_utilization(problem: PackingProblem, selection: frozenset[int]) -> np.ndarray:
    """Per-edge rate consumed by an offline selection (by request id)."""
    load = np.zeros(len(problem.capacities))
    for i, rid in enumerate(problem.request_ids):
        if rid in selection:
            load[list(problem.paths[i])] += problem.rates[i]
    return load


def acceptance_rate(run: RunReport) -> float:
    return run.accepted_count / run.n_requests if run.n_requests else 0.0


_AGG_FIELDS = [
    "ratio",
    "acceptance_rate",
    "alg_util_min",
    "alg_util_mean",
    "alg_util_max",
    "opt_util_min",
    "opt_util_mean",
    "opt_util_max",
]


def aggregate(points: list[ExperimentPoint], group_keys: list[str]) -> list[dict]:
    """Per-group mean and sample standard deviation of the plotted quantities.

    Rows with an infinite ratio contribute to every column except the ratio
    moments; their count is reported as ratio_inf_count.
    """
    groups: dict[tuple, list[ExperimentPoint]] = {}
    for p in points:
        key = tuple(getattr(p, k) for k in group_keys)
        groups.setdefault(key, []).append(p)
    rows = []
    for key in sorted(groups, key=repr):
        members = groups[key]
        row = dict(zip(group_keys, key))
        row["count"] = len(members)
        row["ratio_inf_count"] = sum(1 for p in members if p.ratio_is_inf or math.isinf(p.ratio))
        for name in _AGG_FIELDS:
            vals = [getattr(p, name) for p in members]
            if name == "ratio":
                vals = [v for v in vals if not math.isinf(v)]
            if not vals:
                row[f"{name}_mean"] = math.nan
                row[f"{name}_sd"] = math.nan
                continue
            # sorted so the float reduction is permutation-invariant
            arr = np.sort(np.array(vals, dtype=float))
            row[f"{name}_mean"] = float(np.mean(arr))
            row[f"{name}_sd"] = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        rows.append(row)
    return rows


def points_to_csv(points: list[ExperimentPoint], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf)
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([_fmt(getattr(p, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)
