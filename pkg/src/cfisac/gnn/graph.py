"""Graph construction: antenna-level nodes, typed edges, normalised features.

Node order is all tAP antennas (array-major), then all sAP antennas, then UEs.
Every edge is stored in both directions; ``src -> dst`` means ``dst`` attends
to ``src``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import SystemConfig
from ..geometry import ChannelSet, Geometry, path_loss

TAP, SAP, UE = 0, 1, 2
EDGE_DIM = 5


@dataclass
class HetGraph:
    node_type: np.ndarray  # (V,)
    features: dict  # type -> (n_type, f_type) array
    src: np.ndarray  # (E,)
    dst: np.ndarray
    edge_feat: np.ndarray  # (E, EDGE_DIM)
    edge_kind: np.ndarray  # 0 comm, 1 sensing
    n_tap: int
    n_sap: int
    n_ue: int
    n_t: int
    n_r: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_type)

    def offsets(self):
        a = self.n_tap * self.n_t
        b = a + self.n_sap * self.n_r
        return 0, a, b

    def count_edges(self, kind: int) -> int:
        """Undirected edge count of the given kind."""
        return int(np.sum(self.edge_kind == kind)) // 2


def _db(x):
    return 10.0 * np.log10(np.maximum(np.asarray(x, float), 1e-300))


def build_graph(cfg: SystemConfig, channels: ChannelSet, geometry: Geometry, p_t, p_r,
                beta3_mag: float = 0.0) -> HetGraph:
    """Populate node and edge features from channel magnitudes, phases, path loss and distance.

    Magnitudes are in dB shifted by a fixed -100 dB reference and scaled by
    1/50 so typical values are O(1).
    """
    A, K, n_t = channels.h.shape
    B, _, n_r, _ = channels.H.shape
    p_t, p_r = np.asarray(p_t, float), np.asarray(p_r, float)
    R = cfg.ring_radius
    scale = lambda db: (db + 100.0) / 50.0

    hmag = np.abs(channels.h)  # (A, K, N_T)
    tap_f = []
    for a in range(A):
        for m in range(n_t):
            mags = scale(_db(hmag[a, :, m] ** 2)) if K else np.zeros(1)
            tap_f.append(np.concatenate([p_t[a] / cfg.p_max, [beta3_mag, cfg.p_t,
                                                             float(np.mean(mags)), float(np.var(mags))]]))
    Hmag = np.abs(channels.H)  # (B, A, N_R, N_T)
    sap_f = []
    for b in range(B):
        for n in range(n_r):
            s = scale(_db(np.mean(Hmag[b, :, n, :] ** 2)) + 100.0)
            sap_f.append(np.concatenate([p_r[b] / cfg.p_max, [cfg.gamma_b, s]]))
    ue_f = []
    for k in range(K):
        q = geometry.ue_positions[k] / R
        u = scale(_db(np.mean(hmag[:, k, :] ** 2)))
        pl = scale(_db(np.mean(channels.comm_pl[:, k]))) if channels.comm_pl is not None else 0.0
        ue_f.append([q[0], q[1], (cfg.noise_dbm + 100.0) / 50.0, u, pl])

    node_type = np.array([TAP] * (A * n_t) + [SAP] * (B * n_r) + [UE] * K)
    off_t, off_s, off_u = 0, A * n_t, A * n_t + B * n_r
    src, dst, feat, kind = [], [], [], []

    def link(u, v, f, e_kind):
        src.extend([u, v])
        dst.extend([v, u])
        feat.extend([f, f])
        kind.extend([e_kind, e_kind])

    for a in range(A):
        for m in range(n_t):
            u = off_t + a * n_t + m
            for k in range(K):
                d = np.hypot(*(geometry.tap_positions[a] - geometry.ue_positions[k]))
                hv = channels.h[a, k, m]
                link(u, off_u + k, [scale(_db(abs(hv) ** 2)), np.cos(np.angle(hv)), np.sin(np.angle(hv)),
                                    scale(_db(path_loss(d, cfg.omega_comm, cfg.pl0_db, cfg.d_ref))), d / R], 0)
            for b in range(B):
                d = np.hypot(*(geometry.tap_positions[a] - geometry.target)) + \
                    np.hypot(*(geometry.sap_positions[b] - geometry.target))
                for n in range(n_r):
                    Hv = channels.H[b, a, n, m]
                    link(u, off_s + b * n_r + n,
                         [scale(_db(abs(Hv) ** 2) + 100.0), np.cos(np.angle(Hv)), np.sin(np.angle(Hv)),
                          scale(_db(path_loss(d, cfg.omega_sense, cfg.pl0_db, cfg.d_ref))), d / R], 1)

    features = {TAP: np.array(tap_f, float).reshape(A * n_t, n_t + 4),
                SAP: np.array(sap_f, float).reshape(B * n_r, n_r + 2),
                UE: np.array(ue_f, float).reshape(K, 5)}
    return HetGraph(node_type, features, np.array(src, np.int64), np.array(dst, np.int64),
                    np.array(feat, float).reshape(-1, EDGE_DIM), np.array(kind, np.int64),
                    A, B, K, n_t, n_r)
