"""Worst-case FIM bounds over the 3RDC disk and the scalar epsilon solve.

For every FIM entry the expected value splits into a beta3-free part ``c`` and
perturbations that are linear and quadratic in beta3. With ``|beta3_a| <= eps``
the triangle inequality gives ``|E F - c| <= eps*lin + eps^2*(cross + dist)``
where the aggregates already carry the 2*beta1, 4 and 2 coefficients. The
distortion part of a diagonal entry is a non-negative trace, so it only widens
the upper side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .sensing import FimTerms


@dataclass(frozen=True)
class ThetaSet:
    c11: float
    c22: float
    c12: float
    c21: float
    theta_1: float
    theta_2: float
    theta_3: float
    theta_4: float
    theta_dot_1: float
    theta_dot_2: float
    theta_dot_3: float
    theta_dot_4: float
    theta: float
    theta_dot: float
    entries: dict = field(default_factory=dict, compare=False)

    @property
    def c(self) -> float:
        return self.c11 + self.c22


def _entry_aggregates(terms: FimTerms, b: int, beta1: float):
    s = terms.scale
    out = {}
    for p in range(2):
        for q in range(2):
            c = s * beta1 ** 2 * float(np.real(terms.ups_lin[b, p, q]).sum())
            lin = s * 2 * abs(beta1) * float(np.abs(terms.ups_a[b, p, q]).sum()
                                             + np.abs(terms.ups_c[b, p, q]).sum())
            cross = s * 4 * float(np.abs(terms.ups_ac[b, p, q]).sum())
            dist = s * 2 * float(np.abs(terms.ups_d[b, p, q]).sum())
            out[(p, q)] = dict(c=c, lin=lin, cross=cross, dist=dist)
    return out


def theta_set(terms: FimTerms, b: int, beta1: float = 1.0) -> ThetaSet:
    e = _entry_aggregates(terms, b, beta1)
    e11, e22, e12, e21 = e[(0, 0)], e[(1, 1)], e[(0, 1)], e[(1, 0)]
    return ThetaSet(
        c11=e11["c"], c22=e22["c"], c12=e12["c"], c21=e21["c"],
        theta_1=e11["lin"], theta_2=e22["lin"], theta_3=e12["lin"], theta_4=e21["lin"],
        theta_dot_1=-e11["cross"], theta_dot_2=-e22["cross"],
        theta_dot_3=e12["cross"] + e12["dist"], theta_dot_4=e21["cross"] + e21["dist"],
        theta=e11["lin"] + e22["lin"],
        theta_dot=e11["cross"] + e22["cross"] + e11["dist"] + e22["dist"],
        entries=e,
    )


def fim_bounds(entry, eps: float, th: ThetaSet):
    """(lower, upper) on ``E F[entry]`` for all ``|beta3_a| <= eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    p, q = entry
    e = th.entries[(p, q)]
    upper = e["c"] + eps * e["lin"] + eps ** 2 * (e["cross"] + e["dist"])
    lower_quad = e["cross"] + (0.0 if p == q else e["dist"])
    lower = e["c"] - eps * e["lin"] - eps ** 2 * lower_quad
    return lower, upper


def _diag_factors(eps, th: ThetaSet):
    f1 = th.c11 - eps * th.theta_1 + eps ** 2 * th.theta_dot_1
    f2 = th.c22 - eps * th.theta_2 + eps ** 2 * th.theta_dot_2
    return f1, f2


def diag_poly(th: ThetaSet) -> np.ndarray:
    """Coefficients (ascending powers of eps) of the product of the diagonal lower bounds."""
    c1, c2 = th.c11, th.c22
    t1, t2, d1, d2 = th.theta_1, th.theta_2, th.theta_dot_1, th.theta_dot_2
    return np.array([c1 * c2, -(c1 * t2 + c2 * t1), c1 * d2 + c2 * d1 + t1 * t2,
                     -(t1 * d2 + t2 * d1), d1 * d2])


def offdiag_poly(th: ThetaSet) -> np.ndarray:
    c3, c4 = abs(th.c12), abs(th.c21)
    t3, t4, d3, d4 = th.theta_3, th.theta_4, th.theta_dot_3, th.theta_dot_4
    return np.array([c3 * c4, c3 * t4 + c4 * t3, c3 * d4 + c4 * d3 + t3 * t4,
                     t3 * d4 + t4 * d3, d3 * d4])


def product_bounds(eps: float, th: ThetaSet):
    """Lower bound on ``E F11 * E F22`` and upper bound on ``E F12 * E F21``.

    The diagonal bound is the quartic product of the entry lower bounds while
    both stay non-negative, and 0 otherwise (FIM diagonals are non-negative).
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    powers = eps ** np.arange(5)
    f1, f2 = _diag_factors(eps, th)
    diag_lower = float(diag_poly(th) @ powers) if (f1 >= 0 and f2 >= 0) else 0.0
    return diag_lower, float(offdiag_poly(th) @ powers)


def constraint_lhs(eps, th: ThetaSet):
    """Upper bound on ``E F11 + E F22``."""
    return th.c + eps * th.theta + eps ** 2 * th.theta_dot


def g_exact(eps, th: ThetaSet, gamma_b: float):
    eps = np.asarray(eps, dtype=float)
    coeffs = diag_poly(th) - offdiag_poly(th)
    return gamma_b * np.polynomial.polynomial.polyval(eps, coeffs)


def g_sca(eps, eps0: float, th: ThetaSet, gamma_b: float):
    """``g`` with its cubic and quartic terms replaced by tangents at ``eps0``."""
    eps = np.asarray(eps, dtype=float)
    k = diag_poly(th) - offdiag_poly(th)
    cubic = eps0 ** 3 + 3 * eps0 ** 2 * (eps - eps0)
    quartic = eps0 ** 4 + 4 * eps0 ** 3 * (eps - eps0)
    return gamma_b * (k[0] + k[1] * eps + k[2] * eps ** 2 + k[3] * cubic + k[4] * quartic)


def valid_region(eps, th: ThetaSet):
    f1, f2 = _diag_factors(np.asarray(eps, dtype=float), th)
    return (f1 >= 0) & (f2 >= 0)


def robust_slack(eps, th: ThetaSet, gamma_b: float):
    """``g(eps) - lhs(eps)``; non-negative means the worst-case CRLB trace is within budget."""
    slack = g_exact(eps, th, gamma_b) - constraint_lhs(eps, th)
    return np.where(valid_region(eps, th), slack, -np.inf)


def worst_case_crlb(eps: float, th: ThetaSet) -> float:
    """Upper bound on the CRLB trace over the disk; ``inf`` if not certifiable."""
    diag_lower, off_upper = product_bounds(eps, th)
    det = diag_lower - off_upper
    return float(constraint_lhs(eps, th) / det) if det > 0 else math.inf


@dataclass
class EpsilonSolve:
    epsilon_0: float
    epsilon_star: float
    iterations: int
    history: list
    feasible: bool = True
    converged: bool = False


_GOLDEN = (math.sqrt(5) - 1) / 2


def _golden_max(f, lo, hi, tol=1e-9, max_iter=200):
    a, b = lo, hi
    x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _bisect_boundary(feasible, inside, outside, tol=1e-12, max_iter=200):
    for _ in range(max_iter):
        if abs(outside - inside) < tol:
            break
        mid = 0.5 * (inside + outside)
        if feasible(mid):
            inside = mid
        else:
            outside = mid
    return inside


def _solve_subproblem(objective, feasible, eps_max, n_grid):
    grid = np.linspace(0.0, eps_max, n_grid)
    ok = np.array([feasible(e) for e in grid])
    if not ok.any():
        return None
    vals = np.array([objective(e) if f else -np.inf for e, f in zip(grid, ok)])
    i = int(np.argmax(vals))
    best, best_val = grid[i], vals[i]
    candidates = [(best_val, best)]
    for j in (i - 1, i + 1):
        if 0 <= j < n_grid and not ok[j]:
            edge = _bisect_boundary(feasible, best, grid[j])
            candidates.append((objective(edge), edge))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    if ok[max(i - 1, 0)] and ok[min(i + 1, n_grid - 1)] and hi > lo:
        x = _golden_max(objective, lo, hi)
        if feasible(x):
            candidates.append((objective(x), x))
    # prefer the larger objective; on ties the smaller epsilon
    val, eps = max(candidates, key=lambda t: (t[0], -t[1]))
    return eps


def solve_epsilon(th: ThetaSet, gamma_b: float, objective: Optional[Callable[[float], float]] = None,
                  eps0: float = 0.05, eps_max: float = 0.5, n_grid: int = 2001,
                  tol: float = 1e-6, max_iter: int = 50) -> EpsilonSolve:
    """Maximise ``objective(eps)`` subject to the SCA-linearised robust CRLB constraint.

    Each outer iteration solves the 1-D subproblem on a dense grid, refines the
    best point (bisection on an active constraint, golden section otherwise)
    and moves the expansion point there. ``objective`` defaults to ``eps``
    itself, which yields the largest certifiable uncertainty radius.
    """
    if not gamma_b > 0:
        raise ValueError("gamma_b must be positive")
    obj = objective if objective is not None else (lambda e: e)
    start = eps0
    history = []
    for it in range(1, max_iter + 1):
        feasible = lambda e, e0=eps0: bool(valid_region(e, th)) and \
            constraint_lhs(e, th) <= g_sca(e, e0, th, gamma_b) + 1e-12 * max(1.0, abs(th.c))
        eps_new = _solve_subproblem(obj, feasible, eps_max, n_grid)
        if eps_new is None:
            if not history:
                return EpsilonSolve(start, 0.0, it, history, feasible=False)
            break
        history.append((float(eps_new), float(obj(eps_new)), float(robust_slack(eps_new, th, gamma_b))))
        if abs(eps_new - eps0) < tol:
            return EpsilonSolve(start, float(eps_new), it, history, converged=True)
        eps0 = float(eps_new)
    final = history[-1][0] if history else 0.0
    return EpsilonSolve(start, final, len(history), history, feasible=bool(history))
