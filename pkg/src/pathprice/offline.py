"""Offline optimum of the path-packing problem.

Exhaustive enumeration for tiny problems, branch-and-bound with an LP
relaxation bound for desk-scale ones. No external solver: bounded results
carry an explicit gap when the time budget runs out.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .arrivals import Instance
from .cost import MM1Cost
from .errors import SizeError
from .lp import ITERATION_LIMIT, simplex_max
from .topology import Network

_BRUTE_MAX = 22
_CHUNK_BITS = 16


@dataclass
class PackingProblem:
    values: np.ndarray
    rates: np.ndarray
    paths: list[tuple[int, ...]]
    capacities: np.ndarray
    request_ids: list[int]

    @property
    def n(self) -> int:
        return len(self.values)

    def incidence(self) -> np.ndarray:
        """n x E matrix of per-edge rate consumption."""
        inc = np.zeros((self.n, len(self.capacities)))
        for i, path in enumerate(self.paths):
            inc[i, list(path)] = self.rates[i]
        return inc

    @staticmethod
    def from_instance(net: Network, instance: Instance) -> "PackingProblem":
        from .arrivals import _path_ok

        keep = [r for r in instance.requests if _path_ok(net, r)]
        return PackingProblem(
            values=np.array([r.value for r in keep], dtype=float),
            rates=np.array([r.rate for r in keep], dtype=float),
            paths=[r.path.edge_ids for r in keep],
            capacities=np.array(net.capacities, dtype=float),
            request_ids=[r.id for r in keep],
        )


@dataclass
class OptResult:
    value: float
    selection: frozenset[int]
    exact: bool
    bound_gap: float


def selection_value(problem: PackingProblem, indices) -> float:
    """Canonical float value of a selection (stable summation order)."""
    idx = sorted(indices)
    return float(np.sum(problem.values[idx])) if idx else 0.0


def selection_feasible(problem: PackingProblem, indices, slack: float = 1e-9) -> bool:
    load = np.zeros(len(problem.capacities))
    for i in indices:
        load[list(problem.paths[i])] += problem.rates[i]
    return bool(np.all(load <= problem.capacities * (1.0 + slack)))


def opt_bruteforce(problem: PackingProblem) -> OptResult:
    """Exhaustive search over subsets; ties go to the lexicographically
    smallest selection of request ids."""
    n = problem.n
    if n > _BRUTE_MAX:
        raise SizeError(f"{n} requests exceeds the brute-force cap of {_BRUTE_MAX}")
    if n == 0:
        return OptResult(0.0, frozenset(), True, 0.0)
    inc = problem.incidence()
    caps = problem.capacities * (1.0 + 1e-9)
    bit_cols = np.arange(n)
    best_value = -math.inf
    best_sel: tuple[int, ...] = ()
    for start in range(0, 1 << n, 1 << _CHUNK_BITS):
        stop = min(start + (1 << _CHUNK_BITS), 1 << n)
        masks = np.arange(start, stop, dtype=np.int64)
        bits = (masks[:, None] >> bit_cols) & 1
        feasible = np.all(bits @ inc <= caps, axis=1)
        if not np.any(feasible):
            continue
        vals = bits @ problem.values
        vals[~feasible] = -math.inf
        chunk_best = float(np.max(vals))
        if chunk_best < best_value:
            continue
        for mask in masks[vals == chunk_best]:
            sel = tuple(sorted(problem.request_ids[i] for i in range(n) if (int(mask) >> i) & 1))
            if chunk_best > best_value or sel < best_sel:
                best_value, best_sel = chunk_best, sel
    idx = [problem.request_ids.index(i) for i in best_sel]
    return OptResult(selection_value(problem, idx), frozenset(best_sel), True, 0.0)


@dataclass
class LpBound:
    value: float
    simplex_ok: bool


def lp_upper_bound(problem: PackingProblem) -> LpBound:
    """Optimum of the fractional relaxation; falls back to sum of values on
    numerical failure, which is still a valid (weaker) bound."""
    if problem.n == 0:
        return LpBound(0.0, True)
    res = simplex_max(
        problem.values,
        problem.incidence().T,
        problem.capacities,
        np.ones(problem.n),
    )
    if res.status == ITERATION_LIMIT:
        return LpBound(float(np.sum(problem.values)), False)
    return LpBound(res.value, True)


def opt_bnb(problem: PackingProblem, time_limit: float = 60.0) -> OptResult:
    """Depth-first branch-and-bound, branching on descending value density.

    Exact when the search finishes inside time_limit; otherwise returns the
    incumbent with bound_gap = best open bound minus incumbent.
    """
    n = problem.n
    if n == 0:
        return OptResult(0.0, frozenset(), True, 0.0)
    caps = problem.capacities
    inc = problem.incidence()

    # quick exit: everything fits together
    if np.all(np.sum(inc, axis=0) <= caps * (1.0 + 1e-9)):
        return OptResult(
            selection_value(problem, range(n)), frozenset(problem.request_ids), True, 0.0
        )

    density = problem.values / np.array([problem.rates[i] * len(p) for i, p in enumerate(problem.paths)])
    order = sorted(range(n), key=lambda i: (-density[i], i))
    all_integral_values = bool(np.all(problem.values == np.round(problem.values)))

    def greedy() -> list[int]:
        residual = caps.copy() * (1.0 + 1e-9)
        chosen = []
        for i in order:
            if np.all(inc[i] <= residual):
                residual -= inc[i]
                chosen.append(i)
        return chosen

    incumbent_sel = greedy()
    incumbent = selection_value(problem, incumbent_sel)

    deadline = time.monotonic() + time_limit
    root_bound = math.inf
    # stack entries: (level, residual, fixed_value, fixed_sel, parent_bound)
    stack = [(0, caps.astype(float), 0.0, [], root_bound)]
    exact = True
    best_open = -math.inf

    while stack:
        if time.monotonic() > deadline:
            exact = False
            best_open = max([incumbent] + [e[4] for e in stack] + [best_open])
            break
        level, residual, fixed_value, fixed_sel, parent_bound = stack.pop()
        eps = 1e-9 * (1.0 + abs(incumbent))
        if parent_bound <= incumbent + eps:
            continue
        free = order[level:]
        if not free:
            if fixed_value > incumbent:
                incumbent, incumbent_sel = fixed_value, fixed_sel
            continue
        lp = simplex_max(
            problem.values[free], inc[free].T, residual, np.ones(len(free))
        )
        if lp.status == ITERATION_LIMIT:
            bound = fixed_value + float(np.sum(problem.values[free]))
            frac = None
        else:
            bound = fixed_value + lp.value
            frac = lp.x
        if all_integral_values:
            bound = math.floor(bound + 1e-6)
        if bound <= incumbent + eps:
            continue
        if frac is not None and np.all(np.abs(frac - np.round(frac)) <= 1e-9):
            sel = fixed_sel + [free[k] for k in range(len(free)) if frac[k] > 0.5]
            val = selection_value(problem, sel)
            if val > incumbent:
                incumbent, incumbent_sel = val, sel
            continue
        j = order[level]
        stack.append((level + 1, residual, fixed_value, fixed_sel, bound))
        if np.all(inc[j] <= residual * (1.0 + 1e-9)):
            stack.append(
                (level + 1, residual - inc[j], fixed_value + problem.values[j], fixed_sel + [j], bound)
            )

    value = selection_value(problem, incumbent_sel)
    gap = 0.0 if exact else max(0.0, best_open - value)
    ids = frozenset(problem.request_ids[i] for i in incumbent_sel)
    return OptResult(value, ids, exact, gap)


def opt_cost_worst(p: float, eps: float, capacity: float) -> float:
    """Analytic optimum of the discretized cost-case worst instance."""
    return MM1Cost.f_star((p - eps) * capacity)
