"""Multi-head graph attention encoder with beamforming and position decoders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import autodiff as ad
from ..comm import Solution
from ..config import SystemConfig
from ..feasibility import project_positions, uniform_positions
from .. import kernels
from .graph import EDGE_DIM, SAP, TAP, UE, HetGraph

LN_EPS = 1e-5


def _glorot(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape)


def layer_norm(x):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / ad.sqrt(var + LN_EPS)


@dataclass
class PolicyOutput:
    W_hat: np.ndarray  # (A, N_T, K) complex, before projection
    p_hat_t: np.ndarray  # (A, N_T)
    p_hat_r: np.ndarray  # (B, N_R)
    sol: Solution  # projected
    W_t: Optional[ad.Tensor] = None  # projected, differentiable
    p_t_t: Optional[ad.Tensor] = None
    p_r_t: Optional[ad.Tensor] = None


class GnnPolicy:
    """Parameters live in ``self.params`` (name -> array); forward passes are pure."""

    def __init__(self, cfg: SystemConfig, rng: np.random.Generator):
        d, H = cfg.d_model, cfg.heads
        if d % H:
            raise ValueError("d_model must be divisible by heads")
        self.cfg = cfg
        self.d_model, self.heads, self.layers = d, H, cfg.layers
        in_dims = {TAP: cfg.n_t + 4, SAP: cfg.n_r + 2, UE: 5}
        p = {}
        for t, f in in_dims.items():
            p[f"embed{t}_W"] = _glorot(rng, (f, d))
            p[f"embed{t}_b"] = np.zeros(d)
        for l in range(self.layers):
            for name in ("Wq", "Wk", "Wv", "Wo"):
                p[f"l{l}_{name}"] = _glorot(rng, (d, d))
            p[f"l{l}_We"] = _glorot(rng, (EDGE_DIM, d))
            p[f"l{l}_W1"] = _glorot(rng, (d, 2 * d))
            p[f"l{l}_b1"] = np.zeros(2 * d)
            p[f"l{l}_W2"] = _glorot(rng, (2 * d, d))
            p[f"l{l}_b2"] = np.zeros(d)
        for tag, inp, out in (("w", 2 * d + EDGE_DIM, 2), ("pt", d, cfg.n_t), ("pr", d, cfg.n_r)):
            p[f"dec_{tag}_W1"] = _glorot(rng, (inp, d))
            p[f"dec_{tag}_b1"] = np.zeros(d)
            p[f"dec_{tag}_W2"] = _glorot(rng, (d, out)) if tag == "w" else np.zeros((d, out))
            p[f"dec_{tag}_b2"] = np.zeros(out)
        # position heads start at zero so the initial layout is the one the
        # channel features were measured on
        self.params = p

    # ------------------------------------------------------------------ encoder
    def leaves(self, params=None):
        params = self.params if params is None else params
        return {k: ad.leaf(v) for k, v in params.items()}

    def embed(self, graph: HetGraph, P):
        parts = []
        for t in (TAP, SAP, UE):
            x = graph.features[t]
            if len(x):
                parts.append(ad.as_tensor(x) @ P[f"embed{t}_W"] + P[f"embed{t}_b"])
        return ad.concat(parts, axis=0)

    def attention(self, graph: HetGraph, h, P, l: int):
        """Per-edge attention weights (E, heads) and the aggregated message (V, d)."""
        V, E = graph.n_nodes, len(graph.src)
        H, dk = self.heads, self.d_model // self.heads
        if E == 0:
            return ad.Tensor(np.zeros((0, H))), ad.Tensor(np.zeros((V, self.d_model)))
        q = ad.reshape(h @ P[f"l{l}_Wq"], (V, H, dk))
        hs = ad.gather_rows(h, graph.src)
        k = ad.reshape(hs @ P[f"l{l}_Wk"] + ad.as_tensor(graph.edge_feat) @ P[f"l{l}_We"], (E, H, dk))
        v = ad.reshape(hs @ P[f"l{l}_Wv"], (E, H, dk))
        score = ad.tsum(ad.gather_rows(q, graph.dst) * k, axis=2) * (1.0 / np.sqrt(dk))
        shift = kernels.segment_max(score.value, graph.dst, V)[graph.dst]  # constant; softmax-invariant
        ex = ad.exp(score - shift)
        den = ad.segment_sum(ex, graph.dst, V)
        alpha = ex / ad.gather_rows(den, graph.dst)
        msg = ad.segment_sum(ad.reshape(alpha, (E, H, 1)) * v, graph.dst, V)
        return alpha, ad.reshape(msg, (V, self.d_model)) @ P[f"l{l}_Wo"]

    def layer(self, graph, h, P, l):
        _, msg = self.attention(graph, h, P, l)
        h1 = layer_norm(h + msg)
        ffn = ad.relu(h1 @ P[f"l{l}_W1"] + P[f"l{l}_b1"]) @ P[f"l{l}_W2"] + P[f"l{l}_b2"]
        return layer_norm(h1 + ffn)

    def encode(self, graph: HetGraph, P):
        h = self.embed(graph, P)
        for l in range(self.layers):
            h = self.layer(graph, h, P, l)
        return h

    # ------------------------------------------------------------------ decoders
    @staticmethod
    def _mlp(x, P, tag):
        return ad.relu(x @ P[f"dec_{tag}_W1"] + P[f"dec_{tag}_b1"]) @ P[f"dec_{tag}_W2"] + P[f"dec_{tag}_b2"]

    @property
    def offset_scale(self) -> float:
        """Largest displacement ``f_p`` can apply around the reference grid."""
        return 0.5 * self.cfg.d0

    def reference_layout(self):
        """Centred grids inset by the offset scale.

        When the inset grid spacing is at least ``2*D_0`` no decoded layout can
        leave the interval or violate the spacing, so the projection is inert.
        """
        cfg, s = self.cfg, self.offset_scale
        return (reference_grid(cfg.n_t, cfg.d0, cfg.p_min, cfg.p_max, s),
                reference_grid(cfg.n_r, cfg.d0, cfg.p_min, cfg.p_max, s))

    def decode(self, graph: HetGraph, h, P):
        """Raw outputs ``(W_hat, p_t, p_r)`` as tensors, before projection.

        ``f_w`` is applied per tAP-antenna node to each of its UE links (node
        state, UE state and link features), so the row for antenna m is
        equivariant to relabelling the UEs. ``f_p`` mean-pools each array.
        """
        cfg = self.cfg
        A, B, K, n_t, n_r = graph.n_tap, graph.n_sap, graph.n_ue, graph.n_t, graph.n_r
        off_t, off_s, off_u = graph.offsets()
        h_t = h[off_t:off_s]
        amp = np.sqrt(cfg.p_t / (n_t * max(K, 1)))
        if K:
            # one entry per comm edge (tAP antenna -> UE), rows ordered (antenna, UE)
            sel = np.flatnonzero((graph.edge_kind == 0) & (graph.dst >= off_u))
            sel = sel[np.lexsort((graph.dst[sel], graph.src[sel]))]
            x = ad.concat([ad.gather_rows(h, graph.src[sel]), ad.gather_rows(h, graph.dst[sel]),
                           ad.as_tensor(graph.edge_feat[sel])], axis=1)
            out = self._mlp(x, P, "w")  # (A*N_T*K, 2)
            W = ad.reshape(ad.make_complex(out[:, 0], out[:, 1]), (A, n_t, K)) * amp
        else:
            W = ad.Tensor(np.zeros((A, n_t, 0), complex))
        ref_t, ref_r = self.reference_layout()
        pooled_t = ad.reshape(h_t, (A, n_t, self.d_model)).mean(axis=1)
        p_t = ad.tanh(self._mlp(pooled_t, P, "pt")) * self.offset_scale + ref_t
        h_s = h[off_s:off_s + B * n_r]
        pooled_s = ad.reshape(h_s, (B, n_r, self.d_model)).mean(axis=1)
        p_r = ad.tanh(self._mlp(pooled_s, P, "pr")) * self.offset_scale + ref_r
        return W, p_t, p_r

    def __call__(self, graph: HetGraph, params=None, differentiable: bool = False) -> PolicyOutput:
        P = self.leaves(params) if differentiable else {
            k: ad.Tensor(v) for k, v in (self.params if params is None else params).items()}
        h = self.encode(graph, P)
        W, p_t, p_r = self.decode(graph, h, P)
        out = project(W, p_t, p_r, self.cfg)
        out.P = P
        return out


def reference_grid(n: int, d0: float, p_min: float, p_max: float, inset: float) -> np.ndarray:
    lo, hi = p_min + inset, p_max - inset
    if n == 1:
        return np.array([0.5 * (p_min + p_max)])
    if (hi - lo) / (n - 1) < d0:
        return uniform_positions(n, d0, p_min, p_max)
    return lo + (hi - lo) / (n - 1) * np.arange(n)


def project(W, p_t, p_r, cfg: SystemConfig) -> PolicyOutput:
    """Scale each ``W_a`` into the power budget and repair the positions.

    Power scaling is differentiated exactly; the position repair is passed
    through with identity gradient (it is the identity wherever it is
    inactive).
    """
    W, p_t, p_r = ad.as_tensor(W), ad.as_tensor(p_t), ad.as_tensor(p_r)
    blocks = []
    for a in range(W.shape[0]):
        Wa = W[a]
        norm = np.sqrt(np.sum(np.abs(Wa.value) ** 2))
        if norm > np.sqrt(cfg.p_t):
            Wa = Wa * (np.sqrt(cfg.p_t) / ad.sqrt(ad.tsum(ad.abs2(Wa))))
        blocks.append(Wa)
    Wp = ad.stack(blocks)

    def repair(x):
        fixed = project_positions(x.value, cfg.d0, cfg.p_min, cfg.p_max)
        return x + (fixed - x.value)

    pt, pr = repair(p_t), repair(p_r)
    sol = Solution(Wp.value.copy(), pt.value.copy(), pr.value.copy())
    return PolicyOutput(W.value.copy(), p_t.value.copy(), p_r.value.copy(), sol, Wp, pt, pr)
