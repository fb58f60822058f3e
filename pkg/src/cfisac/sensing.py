"""Expected Fisher information of the target position and the CRLB trace.

The echo mean at sAP b is ``mu_b = sum_a H_{b,a} u_a`` with ``u_a = Xi_a W_a x + d_a``.
For target coordinates (e_p, e_q) the single-snapshot FIM entry is
``(2/sigma_b^2) Re{ dmu_p^H dmu_q }``; its expectation is assembled from the
trace terms below, one per tAP pair ``(a, c)``::

    G       = dH_{a,p}^H dH_{c,q}
    C       = W_c W_a^H
    ups_lin = Tr(G C)
    ups_a   = Tr(G C D_a)        (beta1 * conj(beta3_a))
    ups_c   = Tr(G D_c C)        (beta1 * beta3_c)
    ups_ac  = Tr(G D_c C D_a)    (conj(beta3_a) * beta3_c)
    ups_d   = Tr(G_aa (C_a ⊙ |C_a|^2))   (|beta3_a|^2, a == c only)

with ``D_a = diag(W_a W_a^H)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import SingularFimError, herm_inverse_2x2
from .pa import PaParams


@dataclass
class FimTerms:
    ups_lin: np.ndarray  # (B, 2, 2, A, A) complex
    ups_a: np.ndarray
    ups_c: np.ndarray
    ups_ac: np.ndarray
    ups_d: np.ndarray  # (B, 2, 2, A)
    scale: float  # 2 / sigma_b^2


def fim_terms(dH: np.ndarray, W: np.ndarray, noise_b: float) -> FimTerms:
    """``dH`` (B, A, 2, N_R, N_T) derivative channels, ``W`` (A, N_T, K)."""
    G = np.einsum("bapri,bcqrj->bpqacij", dH.conj(), dH)
    Cx = np.einsum("cik,ajk->acij", W, W.conj())  # Cx[a, c] = W_c W_a^H
    D = np.sum(np.abs(W) ** 2, axis=2)
    lin = np.einsum("bpqacij,acji->bpqac", G, Cx)
    ups_a = np.einsum("bpqacij,acji,ai->bpqac", G, Cx, D)
    ups_c = np.einsum("bpqacij,cj,acji->bpqac", G, D, Cx)
    ups_ac = np.einsum("bpqacij,cj,acji,ai->bpqac", G, D, Cx, D)
    C = W @ W.conj().transpose(0, 2, 1)
    cube = C * np.abs(C) ** 2
    A = W.shape[0]
    G_diag = G[:, :, :, np.arange(A), np.arange(A)]  # (B, 2, 2, A, T, T)
    ups_d = np.einsum("bpqaij,aji->bpqa", G_diag, cube)
    return FimTerms(lin, ups_a, ups_c, ups_ac, ups_d, 2.0 / noise_b)


def _beta3_vec(params: PaParams, A: int) -> np.ndarray:
    return np.array([params.b3(a) for a in range(A)], complex)


def fim_expected(terms: FimTerms, params: PaParams) -> np.ndarray:
    """Expected FIM for every sAP, shape (B, 2, 2), symmetrised."""
    A = terms.ups_d.shape[-1]
    b3 = _beta3_vec(params, A)
    b1 = params.beta1
    inner = (b1 ** 2 * terms.ups_lin
             + 2 * b1 * b3.conj()[:, None] * terms.ups_a
             + 2 * b1 * b3[None, :] * terms.ups_c
             + 4 * np.outer(b3.conj(), b3) * terms.ups_ac)
    F = terms.scale * (np.real(inner).sum(axis=(-2, -1))
                       + np.sum(2 * np.abs(b3) ** 2 * np.real(terms.ups_d), axis=-1))
    return 0.5 * (F + F.transpose(0, 2, 1))


def fim_entry_expected(b: int, n1: int, n2: int, terms: FimTerms, params: PaParams) -> float:
    """Entry (n1, n2) (zero-based) of the expected FIM at sAP b, before symmetrisation."""
    A = terms.ups_d.shape[-1]
    b3 = _beta3_vec(params, A)
    b1 = params.beta1
    inner = (b1 ** 2 * terms.ups_lin[b, n1, n2]
             + 2 * b1 * b3.conj()[:, None] * terms.ups_a[b, n1, n2]
             + 2 * b1 * b3[None, :] * terms.ups_c[b, n1, n2]
             + 4 * np.outer(b3.conj(), b3) * terms.ups_ac[b, n1, n2])
    dist = np.sum(2 * np.abs(b3) ** 2 * np.real(terms.ups_d[b, n1, n2]))
    return float(terms.scale * (np.real(inner).sum() + dist))


def fim_matrix(b: int, terms: FimTerms, params: PaParams) -> np.ndarray:
    return fim_expected(terms, params)[b]


def crlb_trace(J: np.ndarray) -> float:
    """Trace of the inverse FIM; raises :class:`SingularFimError` when unobservable."""
    return float(np.real(np.trace(herm_inverse_2x2(J))))


def crlb_traces(terms: FimTerms, params: PaParams) -> np.ndarray:
    """CRLB trace per sAP; ``inf`` where the FIM is singular or indefinite."""
    out = []
    for J in fim_expected(terms, params):
        try:
            tr = crlb_trace(J)
        except SingularFimError:
            tr = np.inf
        out.append(tr if tr > 0 else np.inf)
    return np.array(out)


def crlb_feasible(terms: FimTerms, params: PaParams, gamma_b: float) -> np.ndarray:
    """Per-sAP gate; a singular FIM never passes, whatever the budget."""
    tr = crlb_traces(terms, params)
    return np.isfinite(tr) & (tr <= gamma_b)


def sample_fim(dH: np.ndarray, lin: np.ndarray, d: np.ndarray, noise_b: float) -> np.ndarray:
    """Sample-average FIM from transmit draws ``lin + d`` of shape (A, N_T, n).

    Independent oracle for :func:`fim_expected`: it differentiates the echo of
    each drawn transmit vector directly.
    """
    u = lin + d
    dmu = np.einsum("bapri,ain->bprn", dH, u)  # (B, 2, N_R, n)
    F = (2.0 / noise_b) * np.real(np.einsum("bprn,bqrn->bpq", dmu.conj(), dmu)) / u.shape[-1]
    return F
