"""Third-order memoryless PA model and its Bussgang decomposition."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import gaussian_complex


@dataclass(frozen=True)
class PaParams:
    """PA coefficients.

    ``beta3`` holds one third-order coefficient per tAP; ``epsilon`` is the
    radius of the disk the true coefficients are known to lie in.
    """

    beta1: float = 1.0
    beta3: tuple = (0.0,)
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "beta3", tuple(complex(b) for b in np.atleast_1d(self.beta3)))

    def b3(self, a: int) -> complex:
        return self.beta3[a] if len(self.beta3) > 1 else self.beta3[0]

    def inside(self) -> bool:
        return all(abs(b) <= self.epsilon + 1e-15 for b in self.beta3)

    def with_beta3(self, beta3) -> "PaParams":
        return replace(self, beta3=tuple(np.atleast_1d(beta3)))


def pa_apply(x, beta1: complex, beta3: complex):
    x = np.asarray(x)
    return beta1 * x + beta3 * x * np.abs(x) ** 2


def bussgang_gain(W: np.ndarray, beta1: complex, beta3: complex) -> np.ndarray:
    """``beta1*I + 2*beta3*diag(W W^H)`` (diagonal, N_T x N_T)."""
    power = np.sum(np.abs(W) ** 2, axis=1)
    return np.diag(beta1 + 2.0 * beta3 * power)


def distortion_covariance(W: np.ndarray, beta3: complex) -> np.ndarray:
    """``2|beta3|^2 (C ⊙ |C|^2)`` with ``C = W W^H``."""
    C = W @ W.conj().T
    return 2.0 * abs(beta3) ** 2 * C * np.abs(C) ** 2


def pa_transmit(s: np.ndarray, W: np.ndarray, beta1: complex, beta3: complex):
    """Pass ``s`` (N_T,) or (N_T, draws) through the PA.

    Returns the output and the Bussgang residual ``d = c - Xi s``.
    """
    c = pa_apply(s, beta1, beta3)
    xi = np.diag(bussgang_gain(W, beta1, beta3))
    d = c - (xi[:, None] * s if s.ndim == 2 else xi * s)
    return c, d


@dataclass
class BussgangModel:
    xi: np.ndarray  # (A, N_T) diagonal of the gain matrices
    xi_hat: np.ndarray  # (A, N_T, N_T)

    def gain_matrix(self, a: int) -> np.ndarray:
        return np.diag(self.xi[a])


def bussgang_model(W: np.ndarray, params: PaParams) -> BussgangModel:
    """Per-tAP gains and distortion covariances for ``W`` of shape (A, N_T, K)."""
    A = W.shape[0]
    xi = np.stack([np.diag(bussgang_gain(W[a], params.beta1, params.b3(a))) for a in range(A)])
    xi_hat = np.stack([distortion_covariance(W[a], params.b3(a)) for a in range(A)])
    return BussgangModel(xi, xi_hat)


def linear_model(W: np.ndarray, beta1: float = 1.0) -> BussgangModel:
    A, n_t, _ = W.shape
    return BussgangModel(np.full((A, n_t), beta1, complex), np.zeros((A, n_t, n_t), complex))


def sample_transmit(W: np.ndarray, params: PaParams, rng, n_draws: int, independent_distortion=True):
    """Monte-Carlo transmit signals for all tAPs.

    Returns ``(x, lin, d)`` with ``x`` (K, n) symbols, ``lin[a] = Xi_a W_a x`` and
    ``d[a]`` the Bussgang residual. With ``independent_distortion`` each tAP's
    residual is produced by its own symbol replica, matching the modelling
    assumption that distortion is independent across tAPs; the residual of a
    shared symbol stream is correlated between tAPs.
    """
    A, n_t, K = W.shape
    x = gaussian_complex(rng, (K, n_draws))
    lin = np.empty((A, n_t, n_draws), complex)
    d = np.empty_like(lin)
    for a in range(A):
        xi = np.diag(bussgang_gain(W[a], params.beta1, params.b3(a)))
        lin[a] = xi[:, None] * (W[a] @ x)
        src = gaussian_complex(rng, (K, n_draws)) if independent_distortion else x
        _, d[a] = pa_transmit(W[a] @ src, W[a], params.beta1, params.b3(a))
    return x, lin, d
