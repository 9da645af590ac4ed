"""Rician links, array responses, MF-RIS operators and cascaded channels.

Shapes used throughout (n nodes, one surface per node, K users):

    H  (n, n, M, N)  node i -> surface j
    R  (n, n, M, M)  surface i -> surface j, only for strictly lower j
    h  (n, K, N)     node -> user
    r  (n, K, M)     surface -> user

A combined channel g[i, k] is a length-N row so that ``g[i, k] @ w`` is
the received amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import LAYER_RANK

SPEED_OF_LIGHT = 2.998e8


@dataclass(frozen=True)
class ChannelParams:
    h0: float = 1e-2
    k0: float = 2.2
    beta0: float = 5.0
    wavelength: float = SPEED_OF_LIGHT / 2.49e9
    spacing: float = SPEED_OF_LIGHT / 2.49e9 / 2
    m_h: int = 8
    m_v: int = 4
    n_antennas: int = 16

    def __post_init__(self):
        if self.h0 <= 0 or self.k0 <= 0 or self.beta0 < 0:
            raise ValueError("need h0 > 0, k0 > 0, beta0 >= 0")

    @property
    def n_elements(self) -> int:
        return self.m_h * self.m_v

    @classmethod
    def from_config(cls, cfg) -> "ChannelParams":
        lam = SPEED_OF_LIGHT / cfg.frequency
        return cls(10 ** (cfg.h0_db / 10), cfg.k0, cfg.beta0, lam, cfg.spacing_wavelengths * lam,
                   cfg.m_h, cfg.m_v, cfg.n_antennas)


def steering_vector(count: int, sin_term: float, wavelength: float = 2.0, spacing: float = 1.0) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.exp(-1j * 2 * np.pi / wavelength * np.arange(count) * spacing * sin_term)


def link_angles(tx, rx):
    """(polar, azimuth) of departure at tx and of arrival at rx."""
    u = np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float)
    d = np.linalg.norm(u)
    if d == 0:
        raise ValueError("degenerate link")
    u = u / d
    dep = (np.arccos(np.clip(u[2], -1, 1)), np.arctan2(u[1], u[0]))
    arr = (np.arccos(np.clip(-u[2], -1, 1)), np.arctan2(-u[1], -u[0]))
    return dep, arr


def _upa(p: ChannelParams, polar, azimuth) -> np.ndarray:
    sp = np.sin(polar)
    vert = steering_vector(p.m_v, sp * np.sin(azimuth), p.wavelength, p.spacing)
    horz = steering_vector(p.m_h, sp * np.cos(azimuth), p.wavelength, p.spacing)
    return np.kron(vert, horz)


def los_component(p: ChannelParams, tx, rx, kind: str) -> np.ndarray:
    """Deterministic array response of one link.

    kind: 'node_surface' (M x N), 'surface_surface' (M x M),
    'node_user' (N,), 'surface_user' (M,).
    """
    (pt, at), (pr, ar) = link_angles(tx, rx)
    if kind == "node_surface":
        tx_arr = steering_vector(p.n_antennas, np.sin(pt) * np.cos(at), p.wavelength, p.spacing)
        return np.outer(_upa(p, pr, ar), tx_arr)
    if kind == "surface_surface":
        return np.outer(_upa(p, pr, ar), _upa(p, pt, at))
    if kind == "node_user":
        return steering_vector(p.n_antennas, np.sin(pt) * np.sin(at), p.wavelength, p.spacing)
    if kind == "surface_user":
        return steering_vector(p.n_elements, np.sin(pt) * np.sin(at), p.wavelength, p.spacing)
    raise ValueError(f"unknown link kind {kind!r}")


def rician_channel(p: ChannelParams, tx, rx, kind: str, rng: np.random.Generator | None) -> np.ndarray:
    """sqrt(h0 / d^k0) * (sqrt(b/(b+1)) LoS + sqrt(1/(b+1)) NLoS).

    ``rng=None`` returns the LoS-only part (NLoS weight kept, draw zeroed).
    """
    d = np.linalg.norm(np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float))
    if d == 0:
        raise ValueError("degenerate link")
    los = los_component(p, tx, rx, kind)
    if np.isinf(p.beta0):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(p.beta0 / (p.beta0 + 1)), np.sqrt(1 / (p.beta0 + 1))
    out = w_los * los
    if rng is not None and w_nlos > 0:
        nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2)
        out = out + w_nlos * nlos
    return np.sqrt(p.h0 / d**p.k0) * out


@dataclass
class MfRisConfig:
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    f: np.ndarray

    def validate(self, beta_max: float = np.inf) -> "MfRisConfig":
        m = len(self.alpha)
        if not (len(self.beta) == len(self.theta) == len(self.f) == m):
            raise ValueError("MF-RIS arrays differ in length")
        if np.any((self.alpha < 0) | (self.alpha > 1)):
            raise ValueError("alpha outside [0, 1]")
        if np.any((self.beta < 0) | (self.beta > beta_max)):
            raise ValueError("beta outside [0, beta_max]")
        if np.any((self.theta < 0) | (self.theta >= 2 * np.pi)):
            raise ValueError("theta outside [0, 2pi)")
        if np.any((self.f != 0) & (self.f != 1)):
            raise ValueError("f must be binary")
        return self

    @classmethod
    def off(cls, m: int) -> "MfRisConfig":
        z = np.zeros(m)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())

    def coefficients(self) -> np.ndarray:
        """Diagonal of the reflection operator."""
        return self.f * self.alpha * np.sqrt(self.beta) * np.exp(1j * self.theta)


def mfris_operator(cfg: MfRisConfig) -> np.ndarray:
    return np.diag(cfg.coefficients())


@dataclass
class ChannelSet:
    H: np.ndarray
    R: np.ndarray
    h: np.ndarray
    r: np.ndarray
    ranks: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.h.shape[0]


def generate_channels(p: ChannelParams, topo, rng: np.random.Generator) -> ChannelSet:
    """Draw every link needed by the cascade for one slot.

    Links that no admissible path uses (upward bounces) stay zero and consume
    no random numbers.
    """
    n, K, N, M = topo.n_nodes, topo.n_users, p.n_antennas, p.n_elements
    ranks = topo.ranks
    H = np.zeros((n, n, M, N), complex)
    R = np.zeros((n, n, M, M), complex)
    h = np.zeros((n, K, N), complex)
    r = np.zeros((n, K, M), complex)
    for i in range(n):
        for j in range(n):
            if ranks[j] <= ranks[i]:
                H[i, j] = rician_channel(p, topo.nodes[i], topo.surfaces[j], "node_surface", rng)
    for i in range(n):
        for j in range(n):
            if ranks[j] < ranks[i]:
                R[i, j] = rician_channel(p, topo.surfaces[i], topo.surfaces[j], "surface_surface", rng)
    for i in range(n):
        for k in range(K):
            h[i, k] = rician_channel(p, topo.nodes[i], topo.users[k], "node_user", rng)
            r[i, k] = rician_channel(p, topo.surfaces[i], topo.users[k], "surface_user", rng)
    return ChannelSet(H, R, h, r, np.asarray(ranks))


def _check(chs: ChannelSet, coeffs: np.ndarray) -> None:
    n, _, M, _ = chs.H.shape
    if coeffs.shape != (n, M):
        raise ValueError(f"coefficients have shape {coeffs.shape}, expected {(n, M)}")


def incident_fields(chs: ChannelSet, coeffs: np.ndarray) -> np.ndarray:
    """Signal arriving at each surface per transmit antenna, before that surface acts.

    Returns (n_tx_nodes, n_surfaces, M, N). A path leaves node i towards a
    surface no higher than i, then only moves to strictly lower layers.
    """
    _check(chs, coeffs)
    n, _, M, N = chs.H.shape
    ranks = chs.ranks
    order = np.argsort(-ranks, kind="stable")
    fields = np.zeros((n, n, M, N), complex)
    for i in range(n):
        for s in order:
            if ranks[s] > ranks[i]:
                continue
            acc = chs.H[i, s].copy()
            for sp in range(n):
                if ranks[s] < ranks[sp] <= ranks[i]:
                    acc += chs.R[sp, s] @ (coeffs[sp][:, None] * fields[i, sp])
            fields[i, s] = acc
    return fields


def combined_channel(chs: ChannelSet, coeffs: np.ndarray, fields: np.ndarray | None = None) -> np.ndarray:
    """g (n, K, N): direct path plus every admissible bounce sequence."""
    if fields is None:
        fields = incident_fields(chs, coeffs)
    # reradiated[s, k, :] per tx node, summed over surfaces
    weighted = np.conj(chs.r) * coeffs[:, None, :]          # (n_s, K, M)
    bounce = np.einsum("skm,ismn->ikn", weighted, fields)
    return np.conj(chs.h) + bounce


def effective_eh_channel(chs: ChannelSet, coeffs: np.ndarray, w: np.ndarray, delta: np.ndarray,
                         fields: np.ndarray | None = None) -> np.ndarray:
    """Superposed incident signal at every surface, (n_surfaces, M)."""
    if w.shape[:2] != delta.shape or w.shape[0] != chs.n_nodes:
        raise ValueError("beamformer and association shapes disagree")
    if fields is None:
        fields = incident_fields(chs, coeffs)
    tx = np.einsum("ik,ikn->in", delta, w)                  # (n, N)
    return np.einsum("ismn,in->sm", fields, tx)


def layer_ranks(layers) -> np.ndarray:
    return np.array([LAYER_RANK[c] for c in layers])
