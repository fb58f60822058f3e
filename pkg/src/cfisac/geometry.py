"""Scenario geometry, movable-antenna field responses and channel construction.

Antenna positions are expressed in wavelengths, so a field response entry is
``exp(-j*2*pi*p*sin(angle))`` with no carrier factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import gaussian_complex, make_rng

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def path_loss(d, exponent: float, pl0_db: float = -30.0, d0: float = 1.0):
    """Linear power gain ``PL0 * (d/d0)^-exponent``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = db_to_linear(pl0_db) * (d / d0) ** (-exponent)
    return float(out) if out.ndim == 0 else out


def angle_to(target, node) -> float:
    """Angle from ``node`` towards ``target``.

    arctan of the slope, shifted by pi when the target lies to the left of the
    node. A vertical line of sight takes the +-pi/2 limit.
    """
    dx = float(target[0]) - float(node[0])
    dy = float(target[1]) - float(node[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("target coincides with node")
    if dx == 0.0:
        return float(np.copysign(np.pi / 2, dy))
    return float(np.arctan(dy / dx) + (np.pi if dx < 0 else 0.0))


def angle_gradient(target, node) -> np.ndarray:
    """Gradient of :func:`angle_to` with respect to the target coordinates."""
    dx = float(target[0]) - float(node[0])
    dy = float(target[1]) - float(node[1])
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        raise ValueError("target coincides with node")
    return np.array([-dy / r2, dx / r2])


def field_response(p, angle: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.exp(-2j * np.pi * p * np.sin(angle))


def field_response_derivative(p, angle: float, angle_rate: float) -> np.ndarray:
    """d/de of :func:`field_response` when ``d angle / de = angle_rate``."""
    p = np.asarray(p, dtype=float)
    return (-2j * np.pi * p * np.cos(angle) * angle_rate) * field_response(p, angle)


@dataclass(frozen=True)
class Geometry:
    target: np.ndarray
    tap_positions: np.ndarray  # (A, 2) meters
    sap_positions: np.ndarray  # (B, 2)
    ue_positions: np.ndarray  # (K, 2)

    def __post_init__(self):
        for nodes in (self.tap_positions, self.sap_positions):
            for node in nodes:
                if np.allclose(node, self.target):
                    raise ValueError("an access point coincides with the target")

    @classmethod
    def ring(cls, n_tap: int, n_sap: int, n_ue: int, radius: float, target=(0.0, 0.0)):
        """Target at ``target``; all nodes equally spaced on a ring, types interleaved."""
        kinds = []
        remaining = {"t": n_tap, "s": n_sap, "u": n_ue}
        while any(remaining.values()):
            for kind in "tus":
                if remaining[kind]:
                    kinds.append(kind)
                    remaining[kind] -= 1
        angles = 2 * np.pi * np.arange(len(kinds)) / len(kinds) + np.pi / len(kinds)
        pts = np.asarray(target, float) + radius * np.stack([np.cos(angles), np.sin(angles)], 1)
        pick = lambda k: pts[[i for i, c in enumerate(kinds) if c == k]].reshape(-1, 2)
        return cls(np.asarray(target, float), pick("t"), pick("s"), pick("u"))


@dataclass(frozen=True)
class CommPath:
    """Multipath description of one tAP-UE link."""

    gains: np.ndarray  # (L,) complex
    delays: np.ndarray  # (L,) seconds
    aods: np.ndarray  # (L,) radians

    def __post_init__(self):
        if len(self.gains) < 1:
            raise ValueError("a link needs at least one path")
        if not np.all(np.isfinite(self.gains)):
            raise ValueError("path gains must be finite")


@dataclass(frozen=True)
class SensingLink:
    rcs: complex
    delay: float
    phi_a: float
    phi_b: float


def comm_channel(path: CommPath, p_a, f_s: float, pl: float = 1.0) -> np.ndarray:
    """Sum of the path field responses, scaled by the amplitude ``sqrt(pl)``."""
    p_a = np.asarray(p_a, dtype=float)
    phases = path.gains * np.exp(-2j * np.pi * f_s * path.delays)
    steer = np.exp(-2j * np.pi * np.outer(p_a, np.sin(path.aods)))
    return np.sqrt(pl) * (steer @ phases)


def sensing_channel(link: SensingLink, p_a, p_b, f_s: float) -> np.ndarray:
    coeff = link.rcs * np.exp(-2j * np.pi * f_s * link.delay)
    return coeff * np.outer(field_response(p_b, link.phi_b), field_response(p_a, link.phi_a).conj())


def sensing_link(geometry: Geometry, a: int, b: int, rcs: complex) -> SensingLink:
    tap, sap, tgt = geometry.tap_positions[a], geometry.sap_positions[b], geometry.target
    delay = (np.hypot(*(tap - tgt)) + np.hypot(*(sap - tgt))) / SPEED_OF_LIGHT
    return SensingLink(rcs, delay, angle_to(tgt, tap), angle_to(tgt, sap))


def steering_derivatives(link: SensingLink, geometry: Geometry, a: int, b: int, p_a, p_b, f_s: float):
    """Derivatives of the sensing channel with respect to the target x and y.

    Only the two angles move with the target; the complex reflection
    coefficient and delay phase are held constant. Returns an array of shape
    ``(2, N_R, N_T)`` (x-derivative first).
    """
    coeff = link.rcs * np.exp(-2j * np.pi * f_s * link.delay)
    grad_a = angle_gradient(geometry.target, geometry.tap_positions[a])
    grad_b = angle_gradient(geometry.target, geometry.sap_positions[b])
    g_a = field_response(p_a, link.phi_a)
    g_b = field_response(p_b, link.phi_b)
    out = []
    for n in range(2):
        dg_a = field_response_derivative(p_a, link.phi_a, grad_a[n])
        dg_b = field_response_derivative(p_b, link.phi_b, grad_b[n])
        out.append(coeff * (np.outer(dg_b, g_a.conj()) + np.outer(g_b, dg_a.conj())))
    return np.stack(out)


@dataclass
class ChannelSet:
    """All position-dependent channels for one layout.

    ``h[a, k]`` is the tAP a to UE k channel (length N_T), ``H[b, a]`` the
    N_R x N_T sensing channel and ``dH[b, a, n]`` its derivative with respect to
    target coordinate n.
    """

    h: np.ndarray  # (A, K, N_T)
    H: np.ndarray  # (B, A, N_R, N_T)
    dH: np.ndarray  # (B, A, 2, N_R, N_T)
    comm_pl: np.ndarray = field(default=None)  # (A, K) linear path loss

    @property
    def shape(self):
        A, K, n_t = self.h.shape
        return A, self.H.shape[0], K, n_t, self.H.shape[2]

    def conj(self) -> "ChannelSet":
        return ChannelSet(self.h.conj(), self.H.conj(), self.dH.conj(), self.comm_pl)


@dataclass
class Scenario:
    """Fixed random draws (paths, links) plus geometry; channels follow the layout."""

    geometry: Geometry
    paths: list  # paths[a][k] -> CommPath
    links: list  # links[b][a] -> SensingLink
    comm_pl: np.ndarray
    f_s: float

    def channels(self, p_t, p_r) -> ChannelSet:
        """``p_t``: (A, N_T) tAP positions, ``p_r``: (B, N_R) sAP positions."""
        A, B = len(self.paths), len(self.links)
        K = len(self.paths[0]) if A else 0
        p_t, p_r = np.asarray(p_t, float), np.asarray(p_r, float)
        h = np.zeros((A, K, p_t.shape[1]), complex)
        for a in range(A):
            for k in range(K):
                h[a, k] = comm_channel(self.paths[a][k], p_t[a], self.f_s, self.comm_pl[a, k])
        H = np.zeros((B, A, p_r.shape[1], p_t.shape[1]), complex)
        dH = np.zeros((B, A, 2) + H.shape[2:], complex)
        for b in range(B):
            for a in range(A):
                link = self.links[b][a]
                H[b, a] = sensing_channel(link, p_t[a], p_r[b], self.f_s)
                dH[b, a] = steering_derivatives(link, self.geometry, a, b, p_t[a], p_r[b], self.f_s)
        return ChannelSet(h, H, dH, self.comm_pl)


def draw_scenario(cfg, seed: int, stream: int = 0) -> Scenario:
    """Draw multipath and sensing links for ``cfg`` (a :class:`SystemConfig`).

    Path AoDs are uniform on [-pi/2, pi/2] and gains complex Gaussian with total
    power one per link; excess delays are uniform on [0, 200 ns].
    """
    rng = make_rng(seed, stream)
    geo = Geometry.ring(cfg.n_tap, cfg.n_sap, cfg.n_ue, cfg.ring_radius, cfg.target)
    L = cfg.n_paths
    paths, comm_pl = [], np.zeros((cfg.n_tap, cfg.n_ue))
    for a in range(cfg.n_tap):
        row = []
        for k in range(cfg.n_ue):
            d = float(np.hypot(*(geo.tap_positions[a] - geo.ue_positions[k])))
            comm_pl[a, k] = path_loss(d, cfg.omega_comm, cfg.pl0_db, cfg.d_ref)
            gains = gaussian_complex(rng, L, 1.0 / L)
            delays = d / SPEED_OF_LIGHT + rng.uniform(0.0, 200e-9, L)
            aods = rng.uniform(-np.pi / 2, np.pi / 2, L)
            row.append(CommPath(gains, delays, aods))
        paths.append(row)
    links = []
    for b in range(cfg.n_sap):
        row = []
        for a in range(cfg.n_tap):
            l_a = float(np.hypot(*(geo.tap_positions[a] - geo.target)))
            l_b = float(np.hypot(*(geo.sap_positions[b] - geo.target)))
            amp = np.sqrt(cfg.rcs * path_loss(l_a, cfg.omega_sense, cfg.pl0_db, cfg.d_ref)
                          * path_loss(l_b, cfg.omega_sense, cfg.pl0_db, cfg.d_ref))
            row.append(sensing_link(geo, a, b, complex(amp)))
        links.append(row)
    return Scenario(geo, paths, links, comm_pl, cfg.f_s)
