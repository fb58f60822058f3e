"""Differentiable versions of the channel, rate and CRLB maps.

Each function mirrors a numpy routine elsewhere in the package (noted per
function) and is cross-checked against it in the tests; the numpy versions
stay the reference.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .geometry import Scenario, angle_gradient

TWO_PI = 2.0 * np.pi


def channels_t(scenario: Scenario, p_t, p_r):
    """Channels as functions of the positions; mirrors :meth:`Scenario.channels`.

    Returns ``(h, dH)`` tensors of shapes (A, K, N_T) and (B, A, 2, N_R, N_T).
    """
    p_t, p_r = ad.as_tensor(p_t), ad.as_tensor(p_r)
    A, B = len(scenario.paths), len(scenario.links)
    K = len(scenario.paths[0])
    geo = scenario.geometry
    rows = []
    for a in range(A):
        pa = ad.reshape(p_t[a], (-1, 1))
        users = []
        for k in range(K):
            path = scenario.paths[a][k]
            phases = path.gains * np.exp(-2j * np.pi * scenario.f_s * path.delays)
            steer = ad.exp(pa * (-2j * np.pi * np.sin(path.aods))[None, :])
            users.append(ad.einsum("tl,l->t", steer, phases) * np.sqrt(scenario.comm_pl[a, k]))
        rows.append(ad.stack(users))
    h = ad.stack(rows)

    out_b = []
    for b in range(B):
        out_a = []
        for a in range(A):
            link = scenario.links[b][a]
            coeff = link.rcs * np.exp(-2j * np.pi * scenario.f_s * link.delay)
            rate_a = angle_gradient(geo.target, geo.tap_positions[a])
            rate_b = angle_gradient(geo.target, geo.sap_positions[b])
            ua = p_t[a] * (-2j * np.pi * np.sin(link.phi_a))
            ub = p_r[b] * (-2j * np.pi * np.sin(link.phi_b))
            g_a, g_b = ad.exp(ua), ad.exp(ub)
            per_n = []
            for n in range(2):
                dg_a = g_a * p_t[a] * (-2j * np.pi * np.cos(link.phi_a) * rate_a[n])
                dg_b = g_b * p_r[b] * (-2j * np.pi * np.cos(link.phi_b) * rate_b[n])
                term = ad.einsum("r,t->rt", dg_b, ad.conj(g_a)) + ad.einsum("r,t->rt", g_b, ad.conj(dg_a))
                per_n.append(term * coeff)
            out_a.append(ad.stack(per_n))
        out_b.append(ad.stack(out_a))
    return h, ad.stack(out_b)


def _robust_parts(h, W, eps, beta1):
    h, W = ad.as_tensor(h), ad.as_tensor(W)
    D = ad.tsum(ad.abs2(W), axis=2)
    g0 = ad.einsum("akn,anj->kj", ad.conj(h), W) * beta1
    t = ad.einsum("akn,an,anj->akj", ad.conj(h), D, W) * 2.0
    C = ad.einsum("aik,ajk->aij", W, ad.conj(W))
    cube = C * ad.abs2(C)
    dist = ad.real(ad.einsum("akn,anm,akm->k", ad.conj(h), cube, h)) * 2.0
    K = g0.shape[0]
    ks = np.arange(K)
    gkk = g0[ks, ks]
    t_abs = ad.tsum(ad.tabs(t), axis=0)  # (K, K)
    amp_pert = t_abs[ks, ks] * eps
    interf = ad.tsum((ad.tabs(g0) + t_abs * eps) ** 2, axis=1)
    return gkk, amp_pert, interf, dist


def robust_surrogate_t(h, W, mu, zeta, eps, beta1, noise):
    """FP surrogate with the worst-case delta bound; mirrors ``comm.robust_fp_objective``."""
    gkk, amp_pert, interf, dist = _robust_parts(h, W, eps, beta1)
    mu = np.asarray(mu, float)
    zeta = np.asarray(zeta, complex)
    desired = (ad.real(gkk * np.conj(zeta)) - amp_pert * np.abs(zeta)) * (2.0 * np.sqrt(1.0 + mu))
    quad = (interf + dist * eps ** 2) * (np.abs(zeta) ** 2)
    const = float(np.sum(np.log2(1.0 + mu) - mu - np.abs(zeta) ** 2 * noise))
    return ad.tsum(desired - quad) + const


def worst_case_rate_t(h, W, eps, beta1, noise):
    """Sum of ``log2(1 + worst-case SINDR)``; mirrors ``comm.worst_case_rate_bound``."""
    gkk, amp_pert, interf, dist = _robust_parts(h, W, eps, beta1)
    amp = ad.maximum(ad.tabs(gkk) - amp_pert, 0.0)
    sig = amp ** 2
    psi_wc = interf + dist * eps ** 2 + noise
    return ad.tsum(ad.log(1.0 + sig / (psi_wc - sig))) * (1.0 / np.log(2.0))


def worst_case_crlb_t(dH, W, eps, beta1, noise_b):
    """Certified CRLB-trace bound per sAP; mirrors ``robust.worst_case_crlb``.

    Returns ``(traces, ok)``; ``ok[b]`` is False where the bound is not
    certifiable (non-positive determinant bound or negative diagonal factor),
    in which case the trace entry is meaningless.
    """
    dH, W = ad.as_tensor(dH), ad.as_tensor(W)
    s = 2.0 / noise_b
    G = ad.einsum("bapri,bcqrj->bpqacij", ad.conj(dH), dH)
    Cx = ad.einsum("cik,ajk->acij", W, ad.conj(W))
    D = ad.tsum(ad.abs2(W), axis=2)
    lin = ad.einsum("bpqacij,acji->bpqac", G, Cx)
    ups_a = ad.einsum("bpqacij,acji,ai->bpqac", G, Cx, D)
    ups_c = ad.einsum("bpqacij,cj,acji->bpqac", G, D, Cx)
    ups_ac = ad.einsum("bpqacij,cj,acji,ai->bpqac", G, D, Cx, D)
    C = ad.einsum("aik,ajk->aij", W, ad.conj(W))
    cube = C * ad.abs2(C)
    A = W.shape[0]
    G_diag = G[:, :, :, np.arange(A), np.arange(A)]
    ups_d = ad.einsum("bpqaij,aji->bpqa", G_diag, cube)

    c = ad.tsum(ad.real(lin), axis=(3, 4)) * (s * beta1 ** 2)
    lin_agg = (ad.tsum(ad.tabs(ups_a), axis=(3, 4)) + ad.tsum(ad.tabs(ups_c), axis=(3, 4))) * (s * 2 * abs(beta1))
    cross = ad.tsum(ad.tabs(ups_ac), axis=(3, 4)) * (s * 4.0)
    dist = ad.tsum(ad.tabs(ups_d), axis=3) * (s * 2.0)

    f1 = c[:, 0, 0] - lin_agg[:, 0, 0] * eps - cross[:, 0, 0] * eps ** 2
    f2 = c[:, 1, 1] - lin_agg[:, 1, 1] * eps - cross[:, 1, 1] * eps ** 2
    o1 = ad.tabs(c[:, 0, 1]) + lin_agg[:, 0, 1] * eps + (cross[:, 0, 1] + dist[:, 0, 1]) * eps ** 2
    o2 = ad.tabs(c[:, 1, 0]) + lin_agg[:, 1, 0] * eps + (cross[:, 1, 0] + dist[:, 1, 0]) * eps ** 2
    det = f1 * f2 - o1 * o2
    lhs = (c[:, 0, 0] + c[:, 1, 1] + (lin_agg[:, 0, 0] + lin_agg[:, 1, 1]) * eps
           + (cross[:, 0, 0] + cross[:, 1, 1] + dist[:, 0, 0] + dist[:, 1, 1]) * eps ** 2)
    ok = (f1.value >= 0) & (f2.value >= 0) & (det.value > 1e-12 * np.abs(lhs.value) ** 2)
    return lhs / det, ok
