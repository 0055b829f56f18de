"""Closed-form competitive-ratio reference curves for line and tree networks.

These evaluate the explicit pre-asymptotic expressions behind the published
order bounds, so they can be overlaid on empirical ratio plots and used as
soft upper bounds. Every evaluator is the max of a saturation-free branch
4(e-1)*gamma + 2 and a topology-dependent saturated branch.
"""

from __future__ import annotations

import math

from .errors import ValidationError

_E1 = math.e - 1.0

PROOF = "proof"
STATEMENT = "statement"


def _check(gamma: float, M: int, m: int, p_bar: float, beta: float = 1.0):
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if not (1 <= m <= M):
        raise ValidationError(f"need 1 <= m <= M, got m={m}, M={M}")
    if p_bar < 1:
        raise ValidationError(f"p_bar must be >= 1, got {p_bar}")
    if beta < 1:
        raise ValidationError(f"beta must be >= 1, got {beta}")


def base_branch(gamma: float) -> float:
    """Bound branch for runs where no edge saturates."""
    return 4.0 * _E1 * gamma + 2.0


def cr_line_uniform(gamma: float, M: int, m: int, p_bar: float) -> float:
    """Uniform-capacity line bound.

    The saturated branch divides by the final price mass of one full edge
    plus 2(m-1) half-loaded neighbours: expm1(gamma) + (2m-2)*expm1(gamma/2).
    """
    _check(gamma, M, m, p_bar)
    denom = math.expm1(gamma) + (2 * m - 2) * math.expm1(gamma / 2.0)
    return max(base_branch(gamma), 2.0 * _E1 * gamma * M * p_bar / denom)


def cr_line_hetero(gamma: float, M: int, m: int, p_bar: float, beta: float) -> float:
    """Heterogeneous-capacity line bound; beta is the max/min capacity ratio."""
    _check(gamma, M, m, p_bar, beta)
    denom = math.expm1(gamma) + 2.0 * (m - 1) * beta * math.expm1(gamma / (2.0 * beta))
    return max(base_branch(gamma), 2.0 * _E1 * gamma * M * p_bar / denom)


def cr_tree_sr(
    gamma: float, M: int, m: int, p_bar: float, profile: str = "uniform",
    convention: str = PROOF,
) -> float:
    """Start-from-root tree bound, uniform or exponentially-decaying capacities.

    For the decaying profile two published conventions disagree on how the
    per-level terms combine; both are implemented. The proof convention (the
    default) takes, for each possibly-saturated level l, the ratio against the
    larger of the two price-mass terms, then the worst level. The statement
    convention combines the level-(m-1) term with a standalone log term.
    """
    _check(gamma, M, m, p_bar)
    numer = 2.0 * _E1 * gamma * M * p_bar
    if profile == "uniform":
        denom = m * 2.0 ** (m - 1) * math.expm1(gamma / 2.0 ** (m - 1))
        return max(base_branch(gamma), numer / denom)
    if profile != "exp_decay":
        raise ValidationError(f"unknown profile {profile!r}")
    if convention == STATEMENT:
        sat = max(
            numer / (m * 2.0 ** (m - 1) * math.expm1(gamma / 2.0 ** (m - 1))),
            numer / math.expm1(gamma),
        )
        return max(base_branch(gamma), sat)
    if convention != PROOF:
        raise ValidationError(f"unknown convention {convention!r}")
    worst = 0.0
    for level in range(m):
        scale = 2.0**level
        price_mass = max(
            level * math.expm1(gamma / scale),
            (m - level + 1) * math.expm1(gamma) / scale,
        )
        worst = max(worst, (numer / scale) / price_mass)
    return max(base_branch(gamma), worst)


def cr_tree_el(
    gamma: float, M: int, m: int, p_bar: float, profile: str = "uniform"
) -> float:
    """End-at-leaf tree bound; the adversary picks the worst saturating depth."""
    _check(gamma, M, m, p_bar)
    numer = 2.0 * _E1 * gamma * M * p_bar
    if profile == "uniform":
        sat = max(
            numer / (x * 2.0 ** (x - 1) * math.expm1(gamma / 2.0 ** (x - 1)))
            for x in range(m, M + 1)
        )
    elif profile == "exp_decay":
        sat = max(numer / (x * math.expm1(gamma)) for x in range(m, M + 1))
    else:
        raise ValidationError(f"unknown profile {profile!r}")
    return max(base_branch(gamma), sat)


def gamma_opt_line(M: int, m: int, p_bar: float) -> float:
    """Order-optimal pricing aggressiveness for uniform lines."""
    _check(1.0, M, m, p_bar)
    return 2.0 * math.log(_E1 * M * p_bar / m + 1.0)
