"""The posted-price admission mechanism: pricing rules, state, and runs.

One run is strictly sequential (arrival order matters); distinct runs share
no mutable state and can execute concurrently.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .arrivals import Instance, Request, validate_instance
from .errors import InternalStateError, ValidationError
from .topology import Edge, Network, Path

E_MINUS_1 = math.e - 1.0


@dataclass(frozen=True)
class ExponentialPricing:
    """price(omega) = exp(gamma * omega / capacity) - 1; zero when idle."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")

    def edge_price(self, edge: Edge, omega: float) -> float:
        return math.exp(self.gamma * omega / edge.capacity) - 1.0

    def rho_cap(self, edge: Edge) -> float | None:
        return None


class TabulatedPricing:
    """Monotone utilization -> price table on [0, rho_domain] for one capacity."""

    def __init__(self, rho_grid: np.ndarray, price_grid: np.ndarray, rho_domain: float, capacity: float):
        if np.any(np.diff(price_grid) < 0):
            raise ValidationError("tabulated prices must be non-decreasing")
        if not math.isclose(price_grid[0], 1.0 / capacity, rel_tol=1e-9):
            raise ValidationError("tabulated price at rho=0 must equal 1/capacity")
        self.rho_grid = np.asarray(rho_grid, dtype=float)
        self.price_grid = np.asarray(price_grid, dtype=float)
        self.rho_domain = float(rho_domain)
        self.capacity = float(capacity)

    def edge_price(self, edge: Edge, omega: float) -> float:
        if edge.capacity != self.capacity:
            raise ValidationError(
                f"table built for capacity {self.capacity}, edge has {edge.capacity}"
            )
        rho = omega / edge.capacity
        if rho > self.rho_domain * (1.0 + 1e-9):
            raise InternalStateError(f"utilization {rho} queried beyond table domain {self.rho_domain}")
        return float(np.interp(rho, self.rho_grid, self.price_grid))

    def rho_cap(self, edge: Edge) -> float | None:
        return self.rho_domain


class Outcome(Enum):
    ACCEPTED_FULL = "accepted_full"
    REJECTED_PRICE = "rejected_price"
    REJECTED_CAPACITY = "rejected_capacity"


@dataclass(frozen=True)
class Decision:
    request_id: int
    outcome: Outcome
    path: Path
    posted_price: float


class MechanismState:
    """Per-edge utilization and posted price, evolving over one run."""

    def __init__(self, net: Network, pricing):
        self.net = net
        self.pricing = pricing
        self.omega = np.zeros(net.edge_count)
        self.price = np.array([pricing.edge_price(e, 0.0) for e in net.edges])
        self.accepted: list[tuple[int, Path, float]] = []
        self.step = 0


def path_price(state: MechanismState, path: Path, rate: float) -> float:
    """Posted price for a path at the current state: rate times summed edge prices."""
    return rate * float(sum(state.price[e] for e in path.edge_ids))


def process_request(state: MechanismState, request: Request, capacity_slack: float = 1e-9) -> Decision:
    """Admit or reject one arrival, updating state in place on acceptance.

    Accepts iff the value strictly exceeds the posted price and the full rate
    fits every path edge; equality on value rejects. The capacity check allows
    an absolute slack of capacity_slack * capacity against accumulation error.
    """
    net, pricing = state.net, state.pricing
    path = request.path  # candidate set is a singleton on lines and trees
    for e in path.edge_ids:
        expect = pricing.edge_price(net.edges[e], float(state.omega[e]))
        if not math.isclose(state.price[e], expect, rel_tol=1e-9, abs_tol=1e-12):
            raise InternalStateError(
                f"edge {e}: stored price {state.price[e]} != pricing({state.omega[e]}) = {expect}"
            )
    posted = path_price(state, path, request.rate)
    state.step += 1
    if not (request.value > posted):
        return Decision(request.id, Outcome.REJECTED_PRICE, path, posted)
    fits = True
    for e in path.edge_ids:
        edge = net.edges[e]
        if state.omega[e] + request.rate > edge.capacity * (1.0 + capacity_slack):
            fits = False
            break
        cap = pricing.rho_cap(edge)
        if cap is not None and (state.omega[e] + request.rate) / edge.capacity > cap * (
            1.0 + capacity_slack
        ):
            fits = False
            break
    if not fits:
        return Decision(request.id, Outcome.REJECTED_CAPACITY, path, posted)
    for e in path.edge_ids:
        state.omega[e] += request.rate
        state.price[e] = pricing.edge_price(net.edges[e], float(state.omega[e]))
    state.accepted.append((request.id, path, posted))
    return Decision(request.id, Outcome.ACCEPTED_FULL, path, posted)


@dataclass
class RunReport:
    alg_welfare: float
    accepted_count: int
    decisions: list[Decision]
    final_utilization: np.ndarray
    final_price: np.ndarray
    cost_total: float
    assumptions_held: dict
    capacity_slack: float
    n_requests: int
    gamma: float | None = None


def run(
    net: Network,
    instance: Instance,
    pricing,
    capacity_slack: float = 1e-9,
    validate: bool = True,
) -> RunReport:
    """Feed an instance through the mechanism in arrival order (no cost)."""
    state, decisions, value = _drive(net, instance, pricing, capacity_slack, validate)
    gamma = pricing.gamma if isinstance(pricing, ExponentialPricing) else None
    return RunReport(
        alg_welfare=value,
        accepted_count=len(state.accepted),
        decisions=decisions,
        final_utilization=state.omega.copy(),
        final_price=state.price.copy(),
        cost_total=0.0,
        assumptions_held=_assumption_flags(net, instance, gamma),
        capacity_slack=capacity_slack,
        n_requests=len(instance.requests),
        gamma=gamma,
    )


def run_with_cost(
    net: Network,
    instance: Instance,
    pricing: TabulatedPricing,
    cost_model,
    capacity_slack: float = 1e-9,
    validate: bool = True,
) -> RunReport:
    """Cost-aware run: welfare is accepted value minus total congestion cost.

    The tabulated pricing also gates admission at its utilization domain, so
    the cost stays finite by construction.
    """
    if not isinstance(pricing, TabulatedPricing):
        raise ValidationError("run_with_cost requires a tabulated pricing rule")
    state, decisions, value = _drive(net, instance, pricing, capacity_slack, validate)
    cost = float(
        sum(cost_model.f(state.omega[e] / net.edges[e].capacity) for e in range(net.edge_count))
    )
    return RunReport(
        alg_welfare=value - cost,
        accepted_count=len(state.accepted),
        decisions=decisions,
        final_utilization=state.omega.copy(),
        final_price=state.price.copy(),
        cost_total=cost,
        assumptions_held=_assumption_flags(net, instance, None),
        capacity_slack=capacity_slack,
        n_requests=len(instance.requests),
        gamma=None,
    )


def _drive(net, instance, pricing, capacity_slack, validate):
    if validate:
        violations = validate_instance(instance, net)
        if violations:
            raise ValidationError(f"instance fails validation: {violations[:5]}")
    state = MechanismState(net, pricing)
    decisions = []
    value = 0.0
    by_id = {r.id: r for r in instance.requests}
    for req in instance.requests:
        d = process_request(state, req, capacity_slack)
        decisions.append(d)
        if d.outcome is Outcome.ACCEPTED_FULL:
            value += by_id[d.request_id].value
    return state, decisions, value


def _assumption_flags(net, instance, gamma) -> dict:
    max_rate = max((r.rate for r in instance.requests), default=0.0)
    flags = {"max_rate": max_rate}
    if gamma is not None:
        flags["eps_le_cmin_over_gamma"] = max_rate <= min(net.capacities) / gamma
    return flags


def welfare_price_floor(report: RunReport, net: Network, gamma: float) -> tuple[float, bool]:
    """Lower bound on welfare from the final total edge prices.

    bound = sum_e C_e * price_e / (2 * gamma * (e - 1)); meaningful on
    exponential no-cost runs whose max rate stayed at or below C_min / gamma.
    """
    bound = float(
        sum(net.edges[e].capacity * report.final_price[e] for e in range(net.edge_count))
    ) / (2.0 * gamma * E_MINUS_1)
    holds = report.alg_welfare + 1e-9 * (1.0 + abs(report.alg_welfare)) >= bound
    return bound, holds


def decisions_to_csv(report: RunReport, instance: Instance) -> str:
    """One row per request: id, outcome, posted price, path length, value."""
    by_id = {r.id: r for r in instance.requests}
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["id", "outcome", "price", "path_length", "value"])
    for d in report.decisions:
        r = by_id[d.request_id]
        w.writerow([d.request_id, d.outcome.value, repr(d.posted_price), r.path.length, repr(r.value)])
    return buf.getvalue()
