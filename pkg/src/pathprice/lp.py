"""Dense bounded-variable primal simplex for packing relaxations.

Maximizes c.x subject to A x <= b and 0 <= x <= u. Capacities are positive,
so the all-slack basis is feasible and no phase-1 is needed. Nonbasic
variables rest at either bound; the ratio test allows bound flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class SimplexResult:
    value: float
    x: np.ndarray
    status: str
    iterations: int


def simplex_max(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    upper: np.ndarray,
    max_iters: int | None = None,
) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape if A.ndim == 2 else (0, len(c))
    if n == 0 or m == 0:
        # only box constraints: take every profitable variable to its upper bound
        x = np.where(c > 0, upper, 0.0)[:n]
        return SimplexResult(float(c[:n] @ x), x, OPTIMAL, 0)

    total = n + m
    T = np.hstack([A, np.eye(m)])
    c_full = np.concatenate([c, np.zeros(m)])
    u_full = np.concatenate([upper, np.full(m, np.inf)])
    basis = np.arange(n, total)
    in_basis = np.zeros(total, dtype=bool)
    in_basis[basis] = True
    at_upper = np.zeros(total, dtype=bool)
    xB = b.astype(float).copy()

    tol = 1e-9 * (1.0 + float(np.max(np.abs(c))))
    if max_iters is None:
        max_iters = 50 * total + 1000
    bland_after = 5 * total + 200

    it = 0
    while True:
        if it >= max_iters:
            return SimplexResult(_objective(c_full, basis, xB, at_upper, u_full), _extract(
                n, total, basis, xB, at_upper, u_full), ITERATION_LIMIT, it)
        z = c_full - c_full[basis] @ T
        can_in = ~in_basis & ~at_upper & (z > tol)
        can_out = ~in_basis & at_upper & (z < -tol)
        eligible = np.flatnonzero(can_in | can_out)
        if eligible.size == 0:
            return SimplexResult(_objective(c_full, basis, xB, at_upper, u_full), _extract(
                n, total, basis, xB, at_upper, u_full), OPTIMAL, it)
        if it < bland_after:
            j = int(eligible[np.argmax(np.abs(z[eligible]))])
        else:
            j = int(eligible[0])  # Bland's rule guards against cycling
        sigma = -1.0 if at_upper[j] else 1.0
        d = sigma * T[:, j]

        # ratio test: basic toward lower bound, basic toward upper, entering flip
        t_best = u_full[j] if math.isfinite(u_full[j]) else np.inf
        leave_row, leave_to_upper = -1, False
        pos = d > tol
        if np.any(pos):
            ratios = xB[pos] / d[pos]
            k = int(np.argmin(ratios))
            if ratios[k] < t_best - 1e-12:
                t_best = float(ratios[k])
                leave_row = int(np.flatnonzero(pos)[k])
                leave_to_upper = False
        neg = d < -tol
        if np.any(neg):
            head = u_full[basis[neg]] - xB[neg]
            ratios = head / (-d[neg])
            k = int(np.argmin(ratios))
            if ratios[k] < t_best - 1e-12:
                t_best = float(ratios[k])
                leave_row = int(np.flatnonzero(neg)[k])
                leave_to_upper = True
        if not math.isfinite(t_best):
            # cannot happen for box-bounded structural columns; bail out safely
            return SimplexResult(_objective(c_full, basis, xB, at_upper, u_full), _extract(
                n, total, basis, xB, at_upper, u_full), ITERATION_LIMIT, it)
        t_best = max(t_best, 0.0)

        xB -= t_best * d
        if leave_row < 0:
            at_upper[j] = ~at_upper[j]
        else:
            leaving = int(basis[leave_row])
            in_basis[leaving] = False
            at_upper[leaving] = leave_to_upper
            enter_value = (u_full[j] if at_upper[j] else 0.0) + sigma * t_best
            piv = T[leave_row, j]
            T[leave_row] /= piv
            col = T[:, j].copy()
            col[leave_row] = 0.0
            T -= np.outer(col, T[leave_row])
            xB[leave_row] = enter_value
            basis[leave_row] = j
            in_basis[j] = True
            at_upper[j] = False
        np.clip(xB, 0.0, None, out=xB)
        it += 1


def _objective(c_full, basis, xB, at_upper, u_full) -> float:
    fixed = np.flatnonzero(at_upper)
    return float(c_full[basis] @ xB + c_full[fixed] @ u_full[fixed])


def _extract(n, total, basis, xB, at_upper, u_full) -> np.ndarray:
    x = np.zeros(total)
    x[at_upper] = u_full[at_upper]
    x[basis] = xB
    return x[:n]
