"""Congestion-cost machinery for the cost-aware mechanism.

Each edge is an M/M/1 queue: serving utilization rho costs f(rho) =
rho/(1-rho). The pricing function for that case solves a singular
boundary-value ODE; this module integrates it, searches for the smallest
pricing aggressiveness gamma admitting a solution, and exports the solution
as a utilization -> price table for the mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SearchError, ValidationError


class MM1Cost:
    """M/M/1 holding cost, its derivative, convex conjugate, and its derivative."""

    @staticmethod
    def f(rho: float) -> float:
        if rho >= 1.0:
            return math.inf
        if rho < 0.0:
            raise ValidationError(f"utilization must be nonnegative, got {rho}")
        return rho / (1.0 - rho)

    @staticmethod
    def f_prime(rho: float) -> float:
        if rho >= 1.0:
            return math.inf
        return 1.0 / (1.0 - rho) ** 2

    @staticmethod
    def f_star(y: float) -> float:
        if y < 1.0:
            return 0.0
        return (math.sqrt(y) - 1.0) ** 2

    @staticmethod
    def f_star_prime(y: float) -> float:
        if y < 1.0:
            return 0.0
        return 1.0 - 1.0 / math.sqrt(y)


def rho_bar(capacity: float, p_bar: float) -> float:
    """Effective utilization: where marginal cost meets the top willingness to pay."""
    if p_bar * capacity <= 1.0:
        raise ValidationError(f"p_bar * capacity must exceed 1, got {p_bar * capacity}")
    return 1.0 - 1.0 / math.sqrt(p_bar * capacity)


def conjugate_check(capacity: float, y_grid) -> float:
    """Max deviation between the closed-form conjugate and a grid-search sup.

    Evaluates sup over rho of y*rho - f(rho) on a coarse grid refined near the
    analytic maximizer, and returns max |grid sup - closed form| over y_grid.
    """
    worst = 0.0
    coarse = np.linspace(0.0, 1.0 - 1e-9, 20001)
    f_coarse = coarse / (1.0 - coarse)
    for y in np.asarray(y_grid, dtype=float):
        best = float(np.max(y * coarse - f_coarse))
        if y >= 1.0:
            r_star = 1.0 - 1.0 / math.sqrt(y)
            w = max(1e-3 * (1.0 - r_star), 1e-9)
            fine = np.clip(np.linspace(r_star - w, r_star + w, 4001), 0.0, 1.0 - 1e-12)
            best = max(best, float(np.max(y * fine - fine / (1.0 - fine))))
        worst = max(worst, abs(best - MM1Cost.f_star(float(y))))
    return worst


@dataclass
class BvpSolution:
    gamma: float
    capacity: float
    p_bar: float
    rho_bar: float
    rho: np.ndarray
    phi: np.ndarray
    feasible: bool
    delta: float
    step: float
    residual_max: float
    converged: bool | None = None

    @property
    def phi_end(self) -> float:
        return float(self.phi[-1])


@njit(cache=True)
def _rk4_phi(gamma: float, a: float, capacity: float, delta: float, rho_end: float, n_steps: int):
    """Fixed-step RK4 for the pricing ODE starting from the series ansatz.

    Returns (phi array, n_valid) where n_valid < n_steps + 1 signals a clamp:
    the denominator hit zero or the slope turned negative mid-domain.
    """
    h = (rho_end - delta) / n_steps
    phi = np.empty(n_steps + 1)
    phi[0] = (1.0 + a * delta) / capacity
    for i in range(n_steps):
        rho = delta + i * h
        p0 = phi[i]

        # k1
        den = 1.0 - 1.0 / math.sqrt(capacity * p0)
        if den <= 0.0:
            return phi, i + 1
        k1 = gamma * (p0 - 1.0 / ((1.0 - rho) ** 2 * capacity)) / den
        if k1 < 0.0:
            return phi, i + 1
        # k2
        p = p0 + 0.5 * h * k1
        den = 1.0 - 1.0 / math.sqrt(capacity * p)
        if den <= 0.0:
            return phi, i + 1
        k2 = gamma * (p - 1.0 / ((1.0 - (rho + 0.5 * h)) ** 2 * capacity)) / den
        # k3
        p = p0 + 0.5 * h * k2
        den = 1.0 - 1.0 / math.sqrt(capacity * p)
        if den <= 0.0:
            return phi, i + 1
        k3 = gamma * (p - 1.0 / ((1.0 - (rho + 0.5 * h)) ** 2 * capacity)) / den
        # k4
        p = p0 + h * k3
        den = 1.0 - 1.0 / math.sqrt(capacity * p)
        if den <= 0.0:
            return phi, i + 1
        k4 = gamma * (p - 1.0 / ((1.0 - (rho + h)) ** 2 * capacity)) / den

        nxt = p0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if nxt < p0:
            return phi, i + 1
        phi[i + 1] = nxt
    return phi, n_steps + 1


def series_slope(gamma: float) -> float:
    """Initial slope coefficient a of the ansatz phi ~ (1 + a*rho)/capacity."""
    return gamma + math.sqrt(max(gamma * gamma - 4.0 * gamma, 0.0))


def integrate_bvp(
    gamma: float,
    capacity: float,
    p_bar: float,
    delta: float = 1e-5,
    step: float | None = None,
    check_convergence: bool = False,
) -> BvpSolution:
    """Integrate the pricing ODE from rho = delta to the effective utilization.

    The ODE is singular at rho = 0 where phi(0) = 1/capacity makes the
    denominator vanish, so integration starts at delta from a local series
    ansatz. Feasibility = the solution stays non-decreasing with a positive
    denominator and reaches p_bar at the right boundary. residual_max records
    the worst violation of the integral form of the ODE along the grid.
    """
    if gamma < 1.0:
        raise ValidationError(f"gamma must be >= 1, got {gamma}")
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    rb = rho_bar(capacity, p_bar)
    if step is None:
        step = 1e-5 * rb
    if step <= 0:
        raise ValidationError(f"step must be positive, got {step}")
    if delta >= rb:
        raise ValidationError(f"delta={delta} must be below rho_bar={rb}")

    sol = _integrate_once(gamma, capacity, p_bar, rb, delta, step)
    if check_convergence:
        half = _integrate_once(gamma, capacity, p_bar, rb, delta, step / 2.0)
        sol.converged = (
            sol.feasible == half.feasible
            and abs(sol.phi_end - half.phi_end) < 1e-6 * max(1.0, abs(sol.phi_end))
        )
    return sol


def _integrate_once(gamma, capacity, p_bar, rb, delta, step) -> BvpSolution:
    n_steps = max(2, int(round((rb - delta) / step)))
    a = series_slope(gamma)
    phi, n_valid = _rk4_phi(gamma, a, capacity, delta, rb, n_steps)
    full = n_valid == n_steps + 1
    phi = phi[:n_valid]
    rho = np.linspace(delta, rb, n_steps + 1)[:n_valid]
    feasible = full and phi[-1] >= p_bar * (1.0 - 1e-12)
    residual = _integral_residual(gamma, capacity, delta, rho, phi)
    return BvpSolution(
        gamma, capacity, p_bar, rb, rho, phi, feasible, delta, step, residual
    )


def _integral_residual(gamma, capacity, delta, rho, phi) -> float:
    """Worst violation of: integral of phi - (f(rho)-f(0))/C >= f*(phi*C)/(gamma*C)."""
    if len(rho) < 2:
        return 0.0
    stub = delta * (1.0 / capacity + phi[0]) / 2.0  # [0, delta] under the ansatz
    integral = np.concatenate(
        ([0.0], np.cumsum(0.5 * (phi[1:] + phi[:-1]) * np.diff(rho)))
    ) + stub
    lhs = integral - (rho / (1.0 - rho)) / capacity
    y = phi * capacity
    rhs = np.where(y >= 1.0, (np.sqrt(np.maximum(y, 1.0)) - 1.0) ** 2, 0.0) / (gamma * capacity)
    return float(max(0.0, np.max(rhs - lhs)))


@dataclass
class GammaSearchResult:
    gamma: float
    bracket_lo: float
    bracket_hi: float
    delta_sensitivity: float
    solution: BvpSolution

    @property
    def boundary_excess(self) -> float:
        """How far the right boundary overshoots p_bar at the returned gamma."""
        return self.solution.phi_end - self.solution.p_bar


_GAMMA_CAP = 2.0**20


def min_gamma(
    capacity: float,
    p_bar: float,
    tol: float = 1e-3,
    delta: float = 1e-5,
    step: float | None = None,
) -> GammaSearchResult:
    """Smallest gamma (within tol) for which the pricing ODE has a solution.

    Bisects the feasibility predicate after doubling an upper bracket until it
    is feasible. The search is repeated at delta/10 and the difference is
    reported as delta_sensitivity.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    g_main, lo, hi = _bisect_gamma(capacity, p_bar, tol, delta, step)
    g_fine, _, _ = _bisect_gamma(capacity, p_bar, tol, delta / 10.0, step)
    sol = integrate_bvp(g_main, capacity, p_bar, delta, step, check_convergence=True)
    return GammaSearchResult(g_main, lo, hi, abs(g_main - g_fine), sol)


def _bisect_gamma(capacity, p_bar, tol, delta, step):
    def feasible(g: float) -> bool:
        return integrate_bvp(g, capacity, p_bar, delta, step).feasible

    lo, hi = 1.0, 2.0
    if feasible(lo):
        return lo, lo, lo
    while not feasible(hi):
        lo = hi
        hi *= 2.0
        if hi > _GAMMA_CAP:
            raise SearchError(
                f"no feasible gamma below {_GAMMA_CAP} for capacity={capacity}, p_bar={p_bar}"
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi, lo, hi


def export_pricing_table(solution: BvpSolution):
    """Turn a feasible ODE solution into a tabulated pricing rule.

    The table pins price 1/capacity at zero utilization and interpolates
    linearly between grid points; its domain ends at the effective
    utilization, beyond which the mechanism must not admit rate.
    """
    from .mechanism import TabulatedPricing

    if not solution.feasible:
        raise ValidationError("refusing to export a pricing table from an infeasible solution")
    rho = np.concatenate(([0.0], solution.rho))
    price = np.concatenate(([1.0 / solution.capacity], solution.phi))
    return TabulatedPricing(rho, price, solution.rho_bar, solution.capacity)
