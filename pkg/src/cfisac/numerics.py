"""Shared numerical helpers: seeded complex Gaussians, 2x2 inversion, finite differences."""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_RTOL = 1e-9


class SingularFimError(ArithmeticError):
    """Raised when a 2x2 Fisher information matrix cannot be inverted."""


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a generator for ``(seed, stream)``.

    Distinct streams of one seed are statistically independent, so each
    Monte-Carlo worker can own one.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def gaussian_complex(rng: np.random.Generator, n, variance: float = 1.0) -> np.ndarray:
    """Draw i.i.d. circularly symmetric complex Gaussian entries.

    ``n`` may be an int or a shape tuple. Each entry has ``E|z|^2 = variance``.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    shape = (n,) if np.isscalar(n) else tuple(n)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def herm_inverse_2x2(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    scale = np.linalg.norm(m) ** 2
    if scale == 0.0 or abs(det) <= 1e-12 * scale:
        raise SingularFimError(f"matrix is singular (|det|={abs(det):.3e})")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a real vector."""
    if not h > 0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value probing coordinate {i}")
        grad.flat[i] = (fp - fm) / (2.0 * h)
    return grad


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * max(1.0, np.linalg.norm(m)))
