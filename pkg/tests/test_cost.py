import math

import numpy as np
import pytest

from pathprice.cost import (
    MM1Cost,
    conjugate_check,
    export_pricing_table,
    integrate_bvp,
    min_gamma,
    rho_bar,
    series_slope,
)
from pathprice.errors import ValidationError


def test_cost_function_shape():
    assert MM1Cost.f(0.0) == 0.0
    assert MM1Cost.f(0.5) == pytest.approx(1.0)
    assert MM1Cost.f(1.0) == math.inf
    # convexity on a grid
    rho = np.linspace(0.0, 0.9, 200)
    vals = np.array([MM1Cost.f(r) for r in rho])
    assert np.all(np.diff(vals, 2) >= -1e-12)


def test_derivative_matches_finite_differences():
    h = 1e-7
    for r in (0.1, 0.4, 0.8):
        fd = (MM1Cost.f(r + h) - MM1Cost.f(r - h)) / (2 * h)
        assert MM1Cost.f_prime(r) == pytest.approx(fd, rel=1e-5)
    for y in (1.5, 4.0, 100.0):
        fd = (MM1Cost.f_star(y + h) - MM1Cost.f_star(y - h)) / (2 * h)
        assert MM1Cost.f_star_prime(y) == pytest.approx(fd, rel=1e-4)


def test_conjugate_duality_inverse_relation():
    # f*'(f'(rho)) recovers rho pointwise
    for rho in np.linspace(0.01, 0.99, 99):
        assert MM1Cost.f_star_prime(MM1Cost.f_prime(rho)) == pytest.approx(rho, abs=1e-9)


def test_rho_bar_values():
    # oracle: bisection on f'(rho) = p_bar * capacity
    def bisect(target):
        lo, hi = 0.0, 1.0 - 1e-12
        for _ in range(200):
            mid = (lo + hi) / 2
            if MM1Cost.f_prime(mid) < target:
                lo = mid
            else:
                hi = mid
        return lo

    assert rho_bar(1.0, 4.0) == pytest.approx(0.5, abs=1e-9)
    assert rho_bar(1.0, 4.0) == pytest.approx(bisect(4.0), abs=1e-9)
    assert rho_bar(40.0, 6.0) == pytest.approx(0.93545, abs=1e-5)
    assert rho_bar(40.0, 6.0) == pytest.approx(bisect(240.0), abs=1e-9)
    # p_bar * capacity -> 1+ sends the effective utilization to zero
    assert rho_bar(1.0, 1.0 + 1e-9) < 1e-4
    with pytest.raises(ValidationError):
        rho_bar(1.0, 0.5)


def test_conjugate_check_tight():
    grid = [0.5, 1.0, 2.0, 4.0, 40.0, 240.0, 5120.0]
    assert conjugate_check(40.0, grid) <= 1e-6


def test_conjugate_value_at_four():
    assert MM1Cost.f_star(4.0) == pytest.approx(1.0)
    assert MM1Cost.f_star(1.0) == 0.0


def test_series_slope_branches():
    assert series_slope(2.0) == pytest.approx(2.0)
    assert series_slope(4.0) == pytest.approx(4.0)
    assert series_slope(6.0) == pytest.approx(6.0 + math.sqrt(36.0 - 24.0))


def test_integrate_boundary_recovered_as_delta_shrinks():
    C = 10.0
    for delta in (1e-4, 1e-5, 1e-6):
        sol = integrate_bvp(6.0, C, 4.0, delta=delta, step=1e-4)
        assert sol.phi[0] == pytest.approx(1.0 / C, rel=1e-2)
    small = integrate_bvp(6.0, C, 4.0, delta=1e-7, step=1e-4)
    assert small.phi[0] == pytest.approx(1.0 / C, rel=1e-5)


def test_integrate_monotone_and_residual():
    sol = integrate_bvp(6.0, 40.0, 6.0)
    assert sol.feasible
    assert np.all(np.diff(sol.phi) >= 0)
    assert sol.residual_max <= 1e-4
    assert sol.phi_end >= 6.0


def test_integrate_infeasible_low_gamma():
    sol = integrate_bvp(1.0, 40.0, 6.0)
    assert not sol.feasible


def test_feasibility_monotone_in_gamma():
    feas = {}
    for g in (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0):
        feas[g] = integrate_bvp(g, 40.0, 4.0).feasible
    keys = sorted(feas)
    crossed = False
    for g in keys:
        if feas[g]:
            crossed = True
        else:
            assert not crossed, f"feasible then infeasible again at gamma={g}"


def test_large_gamma_always_feasible():
    for C, p in ((40.0, 2.0), (40.0, 64.0), (5.0, 8.0)):
        g = 10.0 * math.log(p * C)
        assert integrate_bvp(g, C, p).feasible


def test_integrate_validation():
    with pytest.raises(ValidationError):
        integrate_bvp(0.5, 40.0, 4.0)  # gamma below 1
    with pytest.raises(ValidationError):
        integrate_bvp(2.0, 40.0, 4.0, delta=-1.0)
    with pytest.raises(ValidationError):
        integrate_bvp(2.0, 40.0, 4.0, step=-1e-5)


def test_min_gamma_bisection_contract():
    res = min_gamma(40.0, 4.0, tol=1e-3)
    assert integrate_bvp(res.gamma, 40.0, 4.0).feasible
    assert not integrate_bvp(res.gamma - 2e-3, 40.0, 4.0).feasible
    assert res.bracket_hi - res.bracket_lo <= 1e-3 + 1e-12
    assert res.delta_sensitivity <= 5e-3
    assert res.solution.converged


def test_min_gamma_monotone_in_p_bar():
    gs = [min_gamma(40.0, p, tol=1e-3).gamma for p in (2.0, 4.0, 8.0, 16.0)]
    assert all(b > a for a, b in zip(gs, gs[1:]))


def test_export_pricing_table_contract():
    res = min_gamma(40.0, 6.0, tol=1e-3)
    table = export_pricing_table(res.solution)
    edge = _edge(40.0)
    assert table.edge_price(edge, 0.0) == pytest.approx(1.0 / 40.0, rel=1e-9)
    assert table.edge_price(edge, res.solution.rho_bar * 40.0) >= 6.0 * (1 - 1e-9)
    assert np.all(np.diff(table.price_grid) >= 0)


def test_export_refuses_infeasible():
    sol = integrate_bvp(1.0, 40.0, 6.0)
    assert not sol.feasible
    with pytest.raises(ValidationError):
        export_pricing_table(sol)


def _edge(capacity):
    from pathprice.topology import build_line

    return build_line(2, capacity).edges[0]
