"""Exact projections onto the power and antenna-placement constraints."""

from __future__ import annotations

import numpy as np

from . import kernels


class InfeasibleLayout(ValueError):
    pass


def check_layout(n: int, d0: float, p_min: float, p_max: float) -> None:
    need = (n - 1) * d0
    if p_max < p_min or need > (p_max - p_min) + 1e-12:
        raise InfeasibleLayout(
            f"{n} elements at spacing {d0} need {need:g} wavelengths, range is {p_max - p_min:g}")


def project_power(W: np.ndarray, p_t: float) -> np.ndarray:
    """Radially scale each tAP block so that ``||W_a||_F^2 <= p_t``."""
    W = np.array(W, dtype=complex)
    for a in range(W.shape[0]):
        norm = np.linalg.norm(W[a])
        if norm > np.sqrt(p_t):
            W[a] *= np.sqrt(p_t) / norm
    return W


def repair_spacing(p, d0: float, p_min: float, p_max: float) -> np.ndarray:
    """Clip to the interval, sort, then enforce minimum spacing.

    A left-to-right pass pushes elements right; if the last element overshoots
    ``p_max`` a right-to-left pass pulls the tail back. The result keeps the
    sorted order and meets every constraint exactly (up to float rounding,
    which the final pass absorbs by construction).
    """
    p = np.asarray(p, dtype=float)
    check_layout(p.size, d0, p_min, p_max)
    return kernels.repair_spacing(np.sort(np.clip(p, p_min, p_max)), d0, p_min, p_max)


def project_positions(P, d0: float, p_min: float, p_max: float) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return np.stack([repair_spacing(row, d0, p_min, p_max) for row in P])


def uniform_positions(n: int, d0: float, p_min: float, p_max: float) -> np.ndarray:
    """Centred uniform array with spacing ``max(d0, range/(n-1))``."""
    check_layout(n, d0, p_min, p_max)
    if n == 1:
        return np.array([0.5 * (p_min + p_max)])
    step = max(d0, (p_max - p_min) / (n - 1))
    p = p_min + step * np.arange(n)
    return np.minimum(p, p_max)


def fixed_positions(n: int, spacing: float, p_min: float, p_max: float) -> np.ndarray:
    """Centred uniform grid with the given spacing (fixed-position arrays)."""
    centre = 0.5 * (p_min + p_max)
    return centre + spacing * (np.arange(n) - (n - 1) / 2)


def power_ok(W, p_t: float, tol: float = 1e-9) -> bool:
    return bool(np.all(np.sum(np.abs(W) ** 2, axis=(1, 2)) <= p_t * (1 + tol)))


def positions_ok(P, d0: float, p_min: float, p_max: float, tol: float = 1e-9) -> bool:
    P = np.asarray(P, float)
    if np.any(P < p_min - tol) or np.any(P > p_max + tol):
        return False
    gaps = np.diff(np.sort(P, axis=1), axis=1)
    return bool(np.all(gaps >= d0 - tol))
