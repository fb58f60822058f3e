"""Downlink SINDR, sum rate and the fractional-programming auxiliaries.

Shapes used throughout: channels ``h`` (A, K, N_T), beamformers ``W``
(A, N_T, K); ``g[k, j] = sum_a h_{a,k}^H Xi_a w_{a,j}`` is the effective gain
of stream j at UE k.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .pa import BussgangModel, PaParams


@dataclass(frozen=True)
class LinkBudget:
    noise_k: float
    noise_b: float

    def __post_init__(self):
        if not (self.noise_k > 0 and self.noise_b > 0):
            raise ValueError("noise powers must be positive")


@dataclass
class Solution:
    W: np.ndarray  # (A, N_T, K)
    p_t: np.ndarray  # (A, N_T) wavelengths
    p_r: np.ndarray  # (B, N_R)
    mu: np.ndarray = None
    zeta: np.ndarray = None
    kappa: float = float("nan")

    def __post_init__(self):
        K = self.W.shape[2]
        if self.mu is None:
            self.mu = np.zeros(K)
        if self.zeta is None:
            self.zeta = np.zeros(K, complex)

    def copy(self, **changes) -> "Solution":
        base = dict(W=self.W.copy(), p_t=self.p_t.copy(), p_r=self.p_r.copy(),
                    mu=self.mu.copy(), zeta=self.zeta.copy(), kappa=self.kappa)
        base.update(changes)
        return Solution(**base)


def effective_gains(h: np.ndarray, bm: BussgangModel, W: np.ndarray) -> np.ndarray:
    return np.einsum("akn,an,anj->kj", h.conj(), bm.xi, W)


def distortion_power(h: np.ndarray, bm: BussgangModel) -> np.ndarray:
    return np.einsum("akn,anm,akm->k", h.conj(), bm.xi_hat, h).real


def _parts(channels, bm, sol):
    g = effective_gains(channels.h, bm, sol.W)
    power = np.abs(g) ** 2
    desired = np.diag(power)
    interference = power.sum(axis=1) - desired
    return g, desired, interference, distortion_power(channels.h, bm)


def sindr_all(channels, bm: BussgangModel, sol: Solution, budget: LinkBudget) -> np.ndarray:
    _, desired, interference, dist = _parts(channels, bm, sol)
    return desired / (interference + dist + budget.noise_k)


def sindr(k: int, channels, bm, sol, budget) -> float:
    return float(sindr_all(channels, bm, sol, budget)[k])


def sum_rate(channels, bm, sol, budget) -> float:
    return float(np.sum(np.log2(1.0 + sindr_all(channels, bm, sol, budget))))


def mu_star(k: int, channels, bm, sol, budget) -> float:
    return sindr(k, channels, bm, sol, budget)


def psi(channels, bm, sol, budget) -> np.ndarray:
    """Denominator of the quadratic transform, including the desired stream."""
    g, _, _, dist = _parts(channels, bm, sol)
    return np.sum(np.abs(g) ** 2, axis=1) + dist + budget.noise_k


def zeta_star_all(channels, bm, sol, budget, mu=None) -> np.ndarray:
    mu = sol.mu if mu is None else mu
    g = effective_gains(channels.h, bm, sol.W)
    return np.sqrt(1.0 + mu) * np.diag(g) / psi(channels, bm, sol, budget)


def zeta_star(k: int, channels, bm, sol, budget) -> complex:
    return complex(zeta_star_all(channels, bm, sol, budget)[k])


def delta(channels, bm, sol, budget) -> float:
    g, _, _, dist = _parts(channels, bm, sol)
    mu, zeta = sol.mu, sol.zeta
    lin = 2.0 * np.sqrt(1.0 + mu) * np.real(zeta.conj() * np.diag(g))
    quad = np.abs(zeta) ** 2 * (np.sum(np.abs(g) ** 2, axis=1) + dist)
    return float(np.sum(lin - quad))


def fp_objective(channels, bm, sol, budget) -> float:
    """Reformulated objective: ``sum(log2(1+mu) - mu - |zeta|^2 sigma^2) + delta``."""
    mu, zeta = sol.mu, sol.zeta
    const = np.sum(np.log2(1.0 + mu) - mu - np.abs(zeta) ** 2 * budget.noise_k)
    return float(const + delta(channels, bm, sol, budget))


def quadratic_transform_term(k: int, channels, bm, sol, budget) -> float:
    """The k-th quadratic-transform term for the auxiliaries stored in ``sol``."""
    g = effective_gains(channels.h, bm, sol.W)
    mu, zeta = sol.mu[k], sol.zeta[k]
    return float(2 * np.sqrt(1 + mu) * np.real(np.conj(zeta) * g[k, k])
                 - abs(zeta) ** 2 * psi(channels, bm, sol, budget)[k])


@dataclass
class RobustTerms:
    """Worst-case building blocks over the disk ``|beta3_a| <= eps``.

    ``g0`` is the linear-PA effective gain, ``t[a, k, j] = 2 h_{a,k}^H D_a w_{a,j}``
    the per-unit-beta3 gain perturbation (``D_a = diag(W_a W_a^H)``) and
    ``dist[k]`` the distortion power per unit ``|beta3|^2``.
    """

    g0: np.ndarray
    t: np.ndarray
    dist: np.ndarray = field(default=None)


def robust_terms(h: np.ndarray, W: np.ndarray, beta1: float) -> RobustTerms:
    D = np.sum(np.abs(W) ** 2, axis=2)
    g0 = beta1 * np.einsum("akn,anj->kj", h.conj(), W)
    t = 2.0 * np.einsum("akn,an,anj->akj", h.conj(), D, W)
    C = W @ W.conj().transpose(0, 2, 1)
    cube = C * np.abs(C) ** 2
    dist = 2.0 * np.einsum("akn,anm,akm->k", h.conj(), cube, h).real
    return RobustTerms(g0, t, dist)


def delta_robust_lower(channels, sol: Solution, budget: LinkBudget, params: PaParams,
                       bound: str = "tight") -> float:
    """Lower bound on ``delta`` valid for every ``|beta3_a| <= params.epsilon``.

    ``bound="tight"`` bounds each interference amplitude by the triangle
    inequality, ``(|x| + eps*sum|t|)^2``. ``bound="printed"`` keeps the two
    squared magnitudes without the cross term; that form is not a guaranteed
    bound and is kept for comparison.
    """
    eps = params.epsilon
    rt = robust_terms(channels.h, sol.W, params.beta1)
    mu, zeta = sol.mu, sol.zeta
    K = rt.g0.shape[0]
    ks = np.arange(K)
    desired = 2.0 * np.sqrt(1.0 + mu) * (
        np.real(zeta.conj() * rt.g0[ks, ks]) - eps * np.abs(zeta) * np.sum(np.abs(rt.t[:, ks, ks]), axis=0))
    if bound == "tight":
        interf = np.sum((np.abs(rt.g0) + eps * np.sum(np.abs(rt.t), axis=0)) ** 2, axis=1)
    elif bound == "printed":
        interf = np.sum(np.abs(rt.g0) ** 2 + eps ** 2 * np.abs(np.sum(rt.t, axis=0)) ** 2, axis=1)
    else:
        raise ValueError(f"unknown bound {bound!r}")
    quad = np.abs(zeta) ** 2 * (interf + eps ** 2 * rt.dist)
    return float(np.sum(desired - quad))


def worst_case_sindr(channels, W: np.ndarray, budget: LinkBudget, params: PaParams) -> np.ndarray:
    """SINDR lower bound reached by maximising the robust surrogate over (mu, zeta).

    At ``epsilon = 0`` it is the linear-PA SINDR.
    """
    eps = params.epsilon
    rt = robust_terms(channels.h, W, params.beta1)
    ks = np.arange(rt.g0.shape[0])
    amp = np.maximum(np.abs(rt.g0[ks, ks]) - eps * np.sum(np.abs(rt.t[:, ks, ks]), axis=0), 0.0)
    psi_wc = np.sum((np.abs(rt.g0) + eps * np.sum(np.abs(rt.t), axis=0)) ** 2, axis=1) \
        + eps ** 2 * rt.dist + budget.noise_k
    return amp ** 2 / (psi_wc - amp ** 2)


def robust_auxiliaries(channels, W: np.ndarray, budget: LinkBudget, params: PaParams):
    """Closed-form maximisers ``(mu, zeta)`` of the robust surrogate.

    Reduce to the plain SINDR and quadratic-transform optimum when epsilon is 0.
    """
    eps = params.epsilon
    rt = robust_terms(channels.h, W, params.beta1)
    ks = np.arange(rt.g0.shape[0])
    gkk = rt.g0[ks, ks]
    amp = np.maximum(np.abs(gkk) - eps * np.sum(np.abs(rt.t[:, ks, ks]), axis=0), 0.0)
    psi_wc = np.sum((np.abs(rt.g0) + eps * np.sum(np.abs(rt.t), axis=0)) ** 2, axis=1) \
        + eps ** 2 * rt.dist + budget.noise_k
    mu = amp ** 2 / (psi_wc - amp ** 2)
    phase = np.exp(1j * np.angle(gkk))
    zeta = np.sqrt(1.0 + mu) * amp * phase / psi_wc
    return mu, zeta


def robust_fp_objective(channels, sol: Solution, budget: LinkBudget, params: PaParams,
                        bound: str = "tight") -> float:
    mu, zeta = sol.mu, sol.zeta
    const = np.sum(np.log2(1.0 + mu) - mu - np.abs(zeta) ** 2 * budget.noise_k)
    return float(const + delta_robust_lower(channels, sol, budget, params, bound))


def worst_case_rate_bound(channels, W, budget, params) -> float:
    return float(np.sum(np.log2(1.0 + worst_case_sindr(channels, W, budget, params))))


def with_auxiliaries(sol: Solution, mu, zeta) -> Solution:
    return replace(sol, mu=np.asarray(mu, float), zeta=np.asarray(zeta, complex))
