"""Experiment catalog and runner binding generators, mechanism, and optima.

Each experiment expands into independent (sweep value, seed) cells; cells run
serially or on a bounded process pool and their rows are merged by cell key,
so reruns of the same spec produce byte-identical CSVs apart from the
timestamp comment on the first line.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import arrivals, bounds, metrics
from .arrivals import Instance
from .cost import MM1Cost, export_pricing_table, min_gamma
from .errors import ValidationError
from .mechanism import ExponentialPricing, run, run_with_cost
from .metrics import ExperimentPoint
from .offline import PackingProblem, opt_bnb, opt_bruteforce, opt_cost_worst
from .topology import Network, build_line, build_tree

log = logging.getLogger("pathprice")

WORKERS_ENV = "PATHPRICE_WORKERS"


@dataclass
class ExperimentSpec:
    id: str
    figure: str
    description: str
    topology: dict
    pattern: str
    sweep_name: str
    sweep_values: list = field(default_factory=list)  # dict of param overrides per cell
    gammas: list = field(default_factory=list)  # floats, or "opt" for the order-optimal choice
    n_seeds: int = 1
    seed_base: int = 0
    n_requests: int = 0
    m: int = 1
    M: int = 1
    p_bar: float = 6.0
    rate: float = 1.0
    fill_per_step: int = 1
    opt_time_limit: float = 30.0
    exact_cap: int = 0
    mirrored: bool = False
    save_instances: bool = False
    cost: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @staticmethod
    def from_json(text: str) -> "ExperimentSpec":
        doc = json.loads(text)
        known = {f.name for f in dataclasses.fields(ExperimentSpec)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown spec fields: {sorted(unknown)}")
        return ExperimentSpec(**doc)


_LINE_100 = {"kind": "line", "node_count": 101, "capacity": 100.0}
_TREE_2560 = {"kind": "tree", "depth": 8, "branching": 2, "capacity": 2560.0, "profile": "exp_decay"}


def catalog() -> dict[str, ExperimentSpec]:
    """Built-in experiments; each id carries the figure family it reproduces."""
    specs = [
        ExperimentSpec(
            id="E2",
            figure="fig2",
            description="line network, ratio vs maximum path length",
            topology=dict(_LINE_100),
            pattern=arrivals.LINE_STOCHASTIC,
            sweep_name="M",
            sweep_values=[{"M": v} for v in (5, 10, 20, 40)],
            gammas=[0.5, 2.0, 4.0],
            n_seeds=20,
            seed_base=1000,
            n_requests=300,
            m=1,
            M=40,
            p_bar=6.0,
        ),
        ExperimentSpec(
            id="E3",
            figure="fig3",
            description="tree network (start-from-root), ratio vs maximum path length",
            topology=dict(_TREE_2560),
            pattern=arrivals.TREE_SR,
            sweep_name="M",
            sweep_values=[{"M": v} for v in (2, 4, 8)],
            gammas=[0.5, 2.0, 4.0],
            n_seeds=40,
            seed_base=2000,
            n_requests=3000,
            m=1,
            M=8,
            p_bar=6.0,
        ),
        ExperimentSpec(
            id="E4",
            figure="fig4",
            description="line network, ratio vs minimum path length (M fixed at 50)",
            topology=dict(_LINE_100),
            pattern=arrivals.LINE_STOCHASTIC,
            sweep_name="m",
            sweep_values=[{"m": v} for v in (1, 2, 5, 10, 20, 35, 50)],
            gammas=[0.5, 2.0, 4.0],
            n_seeds=20,
            seed_base=3000,
            n_requests=300,
            m=1,
            M=50,
            p_bar=6.0,
        ),
        ExperimentSpec(
            id="E5",
            figure="fig5",
            description="tree network (start-from-root), ratio vs minimum path length (M fixed at 8)",
            topology=dict(_TREE_2560),
            pattern=arrivals.TREE_SR,
            sweep_name="m",
            sweep_values=[{"m": v} for v in (1, 2, 4, 8)],
            gammas=[0.5, 2.0, 4.0],
            n_seeds=40,
            seed_base=4000,
            n_requests=3000,
            m=1,
            M=8,
            p_bar=6.0,
        ),
        ExperimentSpec(
            id="E6",
            figure="fig6",
            description="hard line instances, ratio vs path length variation M/m",
            topology={"kind": "line", "node_count": None, "capacity": 24.0},
            pattern=arrivals.LINE_HARD,
            sweep_name="M",
            sweep_values=[{"M": v} for v in (2, 4, 8, 16, 32, 64)],
            gammas=[0.5, 2.0, "opt"],
            n_seeds=1,
            seed_base=0,
            m=1,
            M=64,
            p_bar=6.0,
            opt_time_limit=120.0,
        ),
        ExperimentSpec(
            id="E7",
            figure="fig7",
            description="hard tree instances, ratio vs m (M=8) and vs M (m=1)",
            topology={"kind": "tree", "depth": 8, "branching": 2, "capacity": 256.0,
                      "profile": "exp_decay"},
            pattern=arrivals.TREE_HARD,
            sweep_name="m_then_M",
            sweep_values=[{"m": v, "M": 8} for v in (1, 2, 4, 8)]
            + [{"m": 1, "M": v} for v in (2, 4)],
            gammas=[0.5, 2.0, 4.0],
            n_seeds=1,
            seed_base=0,
            m=1,
            M=8,
            p_bar=6.0,
            opt_time_limit=300.0,
        ),
        ExperimentSpec(
            id="E8",
            figure="fig8",
            description="cost case: minimal feasible pricing aggressiveness vs p_bar",
            topology={"kind": "line", "node_count": 2, "capacity": 40.0},
            pattern=arrivals.COST_WORST,
            sweep_name="p_bar",
            sweep_values=[{"p_bar": float(v)} for v in (2, 4, 8, 16, 32, 64, 128)],
            gammas=[],
            n_seeds=1,
            seed_base=0,
            cost={"steps": 200, "eps_scale": 1e-3, "tol": 1e-3},
        ),
    ]
    return {s.id: s for s in specs}


def _effective(spec: ExperimentSpec, overrides: dict) -> dict:
    eff = {"m": spec.m, "M": spec.M, "p_bar": spec.p_bar, "rate": spec.rate}
    eff.update(overrides)
    return eff


def _build_network(spec: ExperimentSpec, eff: dict) -> Network:
    topo = spec.topology
    if topo["kind"] == "line":
        n = topo.get("node_count") or eff["M"] + 1
        return build_line(n, topo["capacity"])
    return build_tree(
        topo["depth"], topo.get("branching", 2), topo["capacity"], topo.get("profile", "uniform")
    )


def _generate(spec: ExperimentSpec, net: Network, eff: dict, seed: int) -> Instance:
    m, M, p_bar, rate = eff["m"], eff["M"], eff["p_bar"], eff["rate"]
    if spec.pattern == arrivals.LINE_STOCHASTIC:
        return arrivals.gen_line_stochastic(net, spec.n_requests, m, M, p_bar, rate, seed)
    if spec.pattern == arrivals.TREE_SR:
        return arrivals.gen_tree_sr_stochastic(net, spec.n_requests, m, M, p_bar, rate, seed)
    if spec.pattern == arrivals.TREE_EL:
        return arrivals.gen_tree_el_stochastic(net, spec.n_requests, m, M, p_bar, rate, seed)
    if spec.pattern == arrivals.LINE_HARD:
        return arrivals.gen_line_hard(net, m, M, p_bar, rate, spec.fill_per_step)
    if spec.pattern == arrivals.TREE_HARD:
        return arrivals.gen_tree_hard(net, m, M, p_bar, rate, spec.fill_per_step)
    raise ValidationError(f"pattern {spec.pattern!r} has no generator binding")


def _resolve_gamma(g, eff: dict) -> tuple[float, str]:
    if g == "opt":
        return bounds.gamma_opt_line(eff["M"], eff["m"], eff["p_bar"]), "opt"
    return float(g), repr(float(g))


_MIRROR_OFFSET = 500_000


def _mechanism_cell(spec: ExperimentSpec, overrides: dict, seed: int) -> list[ExperimentPoint]:
    eff = _effective(spec, overrides)
    # a mirrored cell runs an independent twin network for the reverse travel
    # direction and merges welfare/optimum before the ratio
    leg_seeds = [seed, seed + _MIRROR_OFFSET] if spec.mirrored else [seed]
    legs = []
    for s in leg_seeds:
        net = _build_network(spec, eff)
        inst = _generate(spec, net, eff, s)
        problem = PackingProblem.from_instance(net, inst)
        if problem.n <= spec.exact_cap:
            opt = opt_bruteforce(problem)
        else:
            opt = opt_bnb(problem, spec.opt_time_limit)
        legs.append((net, inst, problem, opt))

    caps = np.concatenate([np.array(net.capacities) for net, _, _, _ in legs])
    opt_rho = np.concatenate(
        [
            metrics.selection_utilization(problem, opt.selection) / np.array(net.capacities)
            for net, _, problem, opt in legs
        ]
    )
    opt_value = sum(opt.value for _, _, _, opt in legs)
    rows = []
    for g in spec.gammas:
        gamma, label = _resolve_gamma(g, eff)
        reports = [run(net, inst, ExponentialPricing(gamma)) for net, inst, _, _ in legs]
        welfare = sum(r.alg_welfare for r in reports)
        ratio = _ratio(welfare, opt_value)
        alg_rho = np.concatenate(
            [r.final_utilization / np.array(net.capacities) for r, (net, _, _, _) in zip(reports, legs)]
        )
        n_total = sum(r.n_requests for r in reports)
        rows.append(
            ExperimentPoint(
                experiment=spec.id,
                figure=spec.figure,
                topology=legs[0][0].kind,
                pattern=spec.pattern,
                gamma=gamma,
                gamma_label=label,
                m=eff["m"],
                M=eff["M"],
                p_bar=eff["p_bar"],
                seed=seed,
                n_requests=n_total,
                ratio=ratio,
                ratio_is_inf=ratio == float("inf"),
                alg_welfare=welfare,
                opt_value=opt_value,
                opt_exact=all(opt.exact for _, _, _, opt in legs),
                opt_gap=sum(opt.bound_gap for _, _, _, opt in legs),
                acceptance_rate=sum(r.accepted_count for r in reports) / n_total if n_total else 0.0,
                alg_util_min=float(np.min(alg_rho)),
                alg_util_mean=float(np.mean(alg_rho)),
                alg_util_max=float(np.max(alg_rho)),
                opt_util_min=float(np.min(opt_rho)),
                opt_util_mean=float(np.mean(opt_rho)),
                opt_util_max=float(np.max(opt_rho)),
                eps_ok=all(
                    r.assumptions_held.get("eps_le_cmin_over_gamma", False) for r in reports
                ),
            )
        )
    return rows


def _ratio(welfare: float, opt_value: float) -> float:
    if welfare == 0:
        return 1.0 if opt_value == 0 else float("inf")
    return opt_value / welfare


def _cost_cell(spec: ExperimentSpec, overrides: dict, seed: int) -> list[ExperimentPoint]:
    eff = _effective(spec, overrides)
    capacity = spec.topology["capacity"]
    p_bar = eff["p_bar"]
    cfg = spec.cost
    eps = cfg.get("eps_scale", 1e-3) * capacity
    search = min_gamma(capacity, p_bar, tol=cfg.get("tol", 1e-3))
    table = export_pricing_table(search.solution)
    net = build_line(2, capacity)
    inst = arrivals.gen_cost_worst_instance(p_bar, capacity, eps, cfg.get("steps", 200))
    report = run_with_cost(net, inst, table, MM1Cost)
    opt_value = opt_cost_worst(p_bar, eps, capacity)
    ratio = opt_value / report.alg_welfare if report.alg_welfare > 0 else float("inf")
    a_min, a_mean, a_max = metrics.utilization_stats(report.final_utilization, net)
    # the offline optimum serves the final density group up to its conjugate level
    opt_rho = MM1Cost.f_star_prime((p_bar - eps) * capacity)
    return [
        ExperimentPoint(
            experiment=spec.id,
            figure=spec.figure,
            topology="line",
            pattern=spec.pattern,
            gamma=search.gamma,
            gamma_label="min_feasible",
            m=1,
            M=1,
            p_bar=p_bar,
            seed=seed,
            n_requests=len(inst.requests),
            ratio=ratio,
            ratio_is_inf=ratio == float("inf"),
            alg_welfare=report.alg_welfare,
            opt_value=opt_value,
            opt_exact=True,
            opt_gap=0.0,
            acceptance_rate=metrics.acceptance_rate(report),
            alg_util_min=a_min,
            alg_util_mean=a_mean,
            alg_util_max=a_max,
            opt_util_min=opt_rho,
            opt_util_mean=opt_rho,
            opt_util_max=opt_rho,
            eps_ok=True,
            min_gamma=search.gamma,
            residual_max=search.solution.residual_max,
            delta_sensitivity=search.delta_sensitivity,
        )
    ]


def _eval_cell(args: tuple) -> tuple[tuple, list[ExperimentPoint] | None, str]:
    spec, overrides, seed = args
    key = (json.dumps(overrides, sort_keys=True), seed)
    try:
        if spec.pattern == arrivals.COST_WORST:
            return key, _cost_cell(spec, overrides, seed), ""
        return key, _mechanism_cell(spec, overrides, seed), ""
    except Exception as exc:  # a failed cell must not sink the others
        return key, None, f"{type(exc).__name__}: {exc}"


def run_experiment(spec: ExperimentSpec, out_dir: str | Path, workers: int | None = None) -> Path:
    """Evaluate every cell of an experiment and write one CSV under out_dir.

    Also writes a plain-text log file next to the CSV; with save_instances
    set, every cell's arrival sequence is saved as replayable JSONL.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / f"{spec.id}.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    try:
        if workers is None:
            workers = int(os.environ.get(WORKERS_ENV, "1"))
        items = [
            (spec, overrides, spec.seed_base + k)
            for overrides in spec.sweep_values
            for k in range(spec.n_seeds)
        ]
        log.info("experiment %s: %d cells, %d workers", spec.id, len(items), workers)
        if spec.save_instances:
            _save_instances(spec, items, out_dir)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_eval_cell, items))
        else:
            results = [_eval_cell(item) for item in items]
        points: list[tuple[tuple, ExperimentPoint]] = []
        for key, rows, err in results:
            if rows is None:
                log.error("cell %s failed: %s", key, err)
                continue
            points.extend((key + (row.gamma_label,), row) for row in rows)
        points.sort(key=lambda kv: repr(kv[0]))
        stamp = datetime.now(timezone.utc).isoformat()
        text = metrics.points_to_csv(
            [row for _, row in points], header_comment=f"generated {stamp} by {spec.id}"
        )
        out = out_dir / f"{spec.id}.csv"
        out.write_text(text)
        log.info("experiment %s: wrote %s", spec.id, out)
        return out
    finally:
        log.removeHandler(handler)
        handler.close()


def _save_instances(spec: ExperimentSpec, items, out_dir: Path) -> None:
    inst_dir = out_dir / "instances"
    inst_dir.mkdir(exist_ok=True)
    for _, overrides, seed in items:
        if spec.pattern == arrivals.COST_WORST:
            continue
        eff = _effective(spec, overrides)
        net = _build_network(spec, eff)
        inst = _generate(spec, net, eff, seed)
        tag = "_".join(f"{k}{v}" for k, v in sorted(overrides.items()))
        (inst_dir / f"{spec.id}_{tag}_s{seed}.jsonl").write_text(arrivals.to_jsonl(inst))
        net_file = inst_dir / f"{spec.id}_{tag}_net.json"
        if not net_file.exists():
            net_file.write_text(net.to_json())
