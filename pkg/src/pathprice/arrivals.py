"""Arrival instance generators: stochastic, adversarial, and cost-case worst.

Stochastic generators are pure functions of (params, seed); the adversarial
and cost-case constructions are fully deterministic. Every generator output
satisfies the instance contract checked by validate_instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import cost as costmod
from .errors import ValidationError
from .topology import LINE, TREE, Network, Path, path_between

LINE_STOCHASTIC = "line_stochastic"
TREE_SR = "tree_sr"
TREE_EL = "tree_el"
LINE_HARD = "line_hard"
TREE_HARD = "tree_hard"
COST_WORST = "cost_worst"

# relative slack for float comparisons against the assumption bounds
_SLACK = 1e-9


@dataclass(frozen=True)
class Request:
    id: int
    value: float
    rate: float
    source: int
    dest: int
    path: Path

    @property
    def value_density(self) -> float:
        return self.value / (self.path.length * self.rate)


@dataclass(frozen=True)
class InstanceParams:
    m: int
    M: int
    p_bar: float
    eps_max: float
    seed: int
    pattern: str


@dataclass
class Instance:
    requests: list[Request]
    params: InstanceParams

    def __len__(self) -> int:
        return len(self.requests)


def _make_request(rid: int, net: Network, s: int, t: int, density: float, rate: float) -> Request:
    path = path_between(net, s, t)
    value = density * path.length * rate
    return Request(rid, value, rate, s, t, path)


def gen_line_stochastic(
    net: Network, n_requests: int, m: int, M: int, p_bar: float, rate: float, seed: int
) -> Instance:
    """Uniform path lengths over {m..M}, uniform start nodes, uniform densities."""
    _check_stochastic_params(net, m, M, p_bar, rate, net.edge_count, "edge count")
    if net.kind != LINE:
        raise ValidationError("gen_line_stochastic needs a line network")
    rng = np.random.default_rng(seed)
    # draw order is part of the reproducibility contract: lengths, starts, densities
    lengths = rng.integers(m, M + 1, n_requests)
    starts = rng.integers(0, net.node_count - lengths) if n_requests else np.array([], int)
    densities = rng.uniform(1.0, p_bar, n_requests)
    reqs = [
        _make_request(i, net, int(starts[i]), int(starts[i] + lengths[i]), float(densities[i]), rate)
        for i in range(n_requests)
    ]
    return Instance(reqs, InstanceParams(m, M, p_bar, rate, seed, LINE_STOCHASTIC))


def gen_tree_sr_stochastic(
    net: Network, n_requests: int, m: int, M: int, p_bar: float, rate: float, seed: int
) -> Instance:
    """Requests start at the root and walk a uniformly random child at each step."""
    _check_stochastic_params(net, m, M, p_bar, rate, net.depth, "tree depth")
    if net.kind != TREE:
        raise ValidationError("gen_tree_sr_stochastic needs a tree network")
    rng = np.random.default_rng(seed)
    b = net.branching
    lengths = rng.integers(m, M + 1, n_requests)
    choices = rng.integers(0, b, (n_requests, M)) if n_requests else np.empty((0, M), int)
    reqs = []
    for i in range(n_requests):
        node = 0
        for k in range(int(lengths[i])):
            node = b * node + 1 + int(choices[i, k])
        density = float(rng.uniform(1.0, p_bar))
        reqs.append(_make_request(i, net, 0, node, density, rate))
    return Instance(reqs, InstanceParams(m, M, p_bar, rate, seed, TREE_SR))


def gen_tree_el_stochastic(
    net: Network, n_requests: int, m: int, M: int, p_bar: float, rate: float, seed: int
) -> Instance:
    """Requests end at a uniformly random leaf; the source sits L levels above it."""
    _check_stochastic_params(net, m, M, p_bar, rate, net.depth, "tree depth")
    if net.kind != TREE:
        raise ValidationError("gen_tree_el_stochastic needs a tree network")
    rng = np.random.default_rng(seed)
    first_leaf = net.first_leaf()
    lengths = rng.integers(m, M + 1, n_requests)
    leaves = rng.integers(0, net.leaf_count(), n_requests) if n_requests else np.array([], int)
    reqs = []
    for i in range(n_requests):
        leaf = first_leaf + int(leaves[i])
        source = leaf
        for _ in range(int(lengths[i])):
            source = net.tree_parent(source)
        density = float(rng.uniform(1.0, p_bar))
        reqs.append(_make_request(i, net, source, leaf, density, rate))
    return Instance(reqs, InstanceParams(m, M, p_bar, rate, seed, TREE_EL))


def _check_stochastic_params(net, m, M, p_bar, rate, limit, limit_name):
    if not (1 <= m <= M):
        raise ValidationError(f"need 1 <= m <= M, got m={m}, M={M}")
    if M > limit:
        raise ValidationError(f"M={M} exceeds {limit_name} {limit}")
    if p_bar < 1:
        raise ValidationError(f"p_bar must be >= 1, got {p_bar}")
    if rate <= 0:
        raise ValidationError(f"rate must be positive, got {rate}")


def hard_density_grid(
    capacity: float, p_bar: float, rate: float, fill_per_step: int, ramp_top_frac: float = 0.5
) -> list[float]:
    """Ascending cheap densities sized so one sweep can saturate an edge.

    The grid has round(capacity / (rate * fill_per_step)) points and ramps
    from 1 toward 1 + (p_bar - 1) * ramp_top_frac, strictly below it. Keeping
    the ramp well under p_bar leaves the phase-2 premium decisive at every
    scale, which is what makes the ratio curves track the pricing
    aggressiveness cleanly.
    """
    k = max(1, round(capacity / (rate * fill_per_step)))
    span = (p_bar - 1.0) * ramp_top_frac
    return [1.0 + span * j / k for j in range(k)]


def gen_line_hard(
    net: Network,
    m: int,
    M: int,
    p_bar: float,
    rate: float,
    fill_per_step: int,
    ramp_top_frac: float = 0.5,
) -> Instance:
    """Adversarial line arrivals: cheap nested prefixes first, long valuable last.

    Phase 1 anchors every request at node 0 and sweeps lengths m..M in
    ascending order; within a length the density ramps up cheaply with enough
    demand per sweep to saturate the covered edges. A greedy mechanism fills
    the first edges cheaply and then cannot serve phase 2: length-M requests
    at density p_bar with total demand equal to one full capacity.
    """
    _check_stochastic_params(net, m, M, p_bar, rate, net.edge_count, "edge count")
    if net.kind != LINE:
        raise ValidationError("gen_line_hard needs a line network")
    cap = min(net.capacities[:M])
    densities = hard_density_grid(cap, p_bar, rate, fill_per_step, ramp_top_frac)
    reqs: list[Request] = []
    rid = 0
    for length in range(m, M + 1):
        for d in densities:
            for _ in range(fill_per_step):
                reqs.append(_make_request(rid, net, 0, length, d, rate))
                rid += 1
    n_phase2 = math.ceil(cap / rate)
    for _ in range(n_phase2):
        reqs.append(_make_request(rid, net, 0, M, p_bar, rate))
        rid += 1
    return Instance(reqs, InstanceParams(m, M, p_bar, rate, 0, LINE_HARD))


def gen_tree_hard(
    net: Network,
    m: int,
    M: int,
    p_bar: float,
    rate: float,
    fill_per_step: int,
    ramp_top_frac: float = 0.5,
) -> Instance:
    """Tree analogue of gen_line_hard.

    Phase 1 floods root-anchored requests of ascending length down every
    branch with cheap ramping densities; phase 2 sends maximum-length
    density-p_bar requests down every branch (root to leaf when M equals the
    tree depth), sized to the branch bottleneck capacity so that together
    they can saturate the covered levels exactly.
    """
    _check_stochastic_params(net, m, M, p_bar, rate, net.depth, "tree depth")
    if net.kind != TREE:
        raise ValidationError("gen_tree_hard needs a tree network")
    b = net.branching
    reqs: list[Request] = []
    rid = 0
    for length in range(m, M + 1):
        first = (b**length - 1) // (b - 1)
        targets = range(first, first + b**length)
        level_cap = min(net.capacities[t - 1] for t in targets)
        densities = hard_density_grid(level_cap, p_bar, rate, fill_per_step, ramp_top_frac)
        for d in densities:
            for t in targets:
                for _ in range(fill_per_step):
                    reqs.append(_make_request(rid, net, 0, t, d, rate))
                    rid += 1
    first_deep = (b**M - 1) // (b - 1)
    for target in range(first_deep, first_deep + b**M):
        branch_cap = min(net.capacities[e] for e in path_between(net, 0, target).edge_ids)
        for _ in range(math.ceil(branch_cap / rate)):
            reqs.append(_make_request(rid, net, 0, target, p_bar, rate))
            rid += 1
    return Instance(reqs, InstanceParams(m, M, p_bar, rate, 0, TREE_HARD))


def gen_cost_worst_instance(p: float, capacity: float, eps: float, steps: int) -> Instance:
    """Discretized cost-case worst instance on a single edge.

    Densities sweep an ascending grid from 1/capacity to p; the group at
    density nu carries total demand capacity * conjugate_derivative(nu *
    capacity), split into requests of rate at most eps. A final group arrives
    at density p - eps. Pair with build_line(2, capacity).
    """
    if steps < 2:
        raise ValidationError(f"steps must be >= 2, got {steps}")
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if p <= 1.0 / capacity:
        raise ValidationError(
            f"p={p} must exceed 1/capacity={1.0 / capacity}; all welfare would be nonpositive"
        )
    path = Path((0,))
    reqs: list[Request] = []
    rid = 0

    def emit_group(nu: float) -> int:
        nonlocal rid
        total = capacity * costmod.MM1Cost.f_star_prime(nu * capacity)
        n_full = int(total / eps)
        rates = [eps] * n_full
        rem = total - n_full * eps
        if rem > eps * 1e-12:
            rates.append(rem)
        for r in rates:
            reqs.append(Request(rid, nu * r, r, 0, 1, path))
            rid += 1
        return len(rates)

    for nu in np.linspace(1.0 / capacity, p, steps):
        emit_group(float(nu))
    emit_group(p - eps)
    return Instance(reqs, InstanceParams(1, 1, p, eps, 0, COST_WORST))


def validate_instance(inst: Instance, net: Network) -> list[tuple[int, str]]:
    """Every (request id, violated rule) pair; empty means the instance is valid.

    Rules: rate bound ("rate"), path length bounds ("length"), value density
    bounds ("density"), and path validity against the network ("path"). The
    cost-case pattern replaces the unit density floor with positivity, since
    its construction deliberately starts below unit density.
    """
    p = inst.params
    lo_density = 0.0 if p.pattern == COST_WORST else 1.0
    violations: list[tuple[int, str]] = []
    for r in inst.requests:
        if r.rate > p.eps_max * (1 + _SLACK) or r.rate <= 0:
            violations.append((r.id, "rate"))
        if not (p.m <= r.path.length <= p.M):
            violations.append((r.id, "length"))
        d = r.value_density
        if not (lo_density * (1 - _SLACK) <= d <= p.p_bar * (1 + _SLACK)) or d <= 0:
            violations.append((r.id, "density"))
        if not _path_ok(net, r):
            violations.append((r.id, "path"))
    return violations


def _path_ok(net: Network, r: Request) -> bool:
    ids = r.path.edge_ids
    if not ids:
        return False
    if any(not (0 <= e < net.edge_count) for e in ids):
        return False
    edges = [net.edges[e] for e in ids]
    if edges[0].tail != r.source or edges[-1].head != r.dest:
        return False
    return all(edges[k].head == edges[k + 1].tail for k in range(len(edges) - 1))


def to_jsonl(inst: Instance) -> str:
    """Line-oriented JSON: one header record, then one record per request."""
    p = inst.params
    lines = [
        json.dumps(
            {
                "kind": "instance",
                "pattern": p.pattern,
                "m": p.m,
                "M": p.M,
                "p_bar": p.p_bar,
                "eps_max": p.eps_max,
                "seed": p.seed,
                "n": len(inst.requests),
            }
        )
    ]
    for r in inst.requests:
        lines.append(
            json.dumps({"id": r.id, "v": r.value, "r": r.rate, "s": r.source, "t": r.dest})
        )
    return "\n".join(lines) + "\n"


def from_jsonl(text: str, net: Network) -> Instance:
    """Rebuild an instance against a network; paths are re-resolved."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty instance document")
    head = json.loads(lines[0])
    if head.get("kind") != "instance":
        raise ValidationError("missing instance header record")
    params = InstanceParams(
        head["m"], head["M"], head["p_bar"], head["eps_max"], head["seed"], head["pattern"]
    )
    reqs = []
    for ln in lines[1:]:
        rec = json.loads(ln)
        path = path_between(net, rec["s"], rec["t"])
        reqs.append(Request(rec["id"], rec["v"], rec["r"], rec["s"], rec["t"], path))
    if len(reqs) != head["n"]:
        raise ValidationError(f"header promises {head['n']} requests, found {len(reqs)}")
    return Instance(reqs, params)
