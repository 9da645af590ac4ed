"""Hybrid action container, vector codec and feasibility projection."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class HybridAction:
    w: np.ndarray            # (K, N) complex beamformers
    alpha: np.ndarray        # (M,) reflection share
    beta: np.ndarray         # (M,) amplitude gain
    theta: np.ndarray        # (M,) phase
    f: np.ndarray            # (M,) element on/off
    claims: np.ndarray       # (K,) 1 = wants to serve user k
    scores: np.ndarray       # (K,) claim strength for conflict resolution
    u_level: int = 0
    haps_cell: int = -1      # -1 for nodes that cannot move

    def copy(self) -> "HybridAction":
        return replace(self, w=self.w.copy(), alpha=self.alpha.copy(), beta=self.beta.copy(),
                       theta=self.theta.copy(), f=self.f.copy(), claims=self.claims.copy(),
                       scores=self.scores.copy())

    def coefficients(self) -> np.ndarray:
        return self.f * self.alpha * np.sqrt(self.beta) * np.exp(1j * self.theta)

    def equals(self, other: "HybridAction") -> bool:
        return (all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("w", "alpha", "beta", "theta", "f", "claims", "scores"))
                and self.u_level == other.u_level and self.haps_cell == other.haps_cell)


class ActionCodec:
    """Maps between HybridAction and the flat vectors the learners see.

    Continuous part lives in [-1, 1]^d: [Re w, Im w, alpha, beta, theta].
    Discrete part is one index per head: M on/off heads, K claim heads,
    one compute-level head, and a grid-cell head for HAPS agents.
    """

    def __init__(self, n_users, n_antennas, n_elements, u_levels, p_max, beta_max, n_cells=0):
        self.K, self.N, self.M = n_users, n_antennas, n_elements
        self.u_levels = u_levels
        self.p_max = p_max
        self.beta_max = beta_max
        self.n_cells = n_cells
        self.w_scale = np.sqrt(p_max / (n_users * n_antennas))

    @property
    def cont_dim(self) -> int:
        return 2 * self.K * self.N + 3 * self.M

    @property
    def heads(self) -> list[int]:
        h = [2] * self.M + [2] * self.K + [self.u_levels]
        if self.n_cells:
            h.append(self.n_cells)
        return h

    @property
    def onehot_dim(self) -> int:
        return int(sum(self.heads))

    def build(self, cont: np.ndarray, dis: np.ndarray, scores=None) -> HybridAction:
        cont = np.clip(np.asarray(cont, dtype=float), -1.0, 1.0)
        dis = np.asarray(dis, dtype=int)
        KN, M, K = self.K * self.N, self.M, self.K
        w = (cont[:KN] + 1j * cont[KN:2 * KN]).reshape(K, self.N) * self.w_scale
        o = 2 * KN
        alpha = (cont[o:o + M] + 1) / 2
        beta = (cont[o + M:o + 2 * M] + 1) / 2 * self.beta_max
        theta = np.mod((cont[o + 2 * M:o + 3 * M] + 1) * np.pi, 2 * np.pi)
        f = dis[:M].astype(float)
        claims = dis[M:M + K].astype(float)
        u = int(dis[M + K])
        cell = int(dis[M + K + 1]) if self.n_cells else -1
        sc = np.ones(K) if scores is None else np.asarray(scores, dtype=float)
        return HybridAction(w, alpha, beta, theta, f, claims, sc, u, cell)

    def cont_vector(self, a: HybridAction) -> np.ndarray:
        w = a.w.reshape(-1) / self.w_scale
        beta = a.beta / self.beta_max * 2 - 1 if self.beta_max > 0 else np.zeros(self.M)
        v = np.concatenate([w.real, w.imag, a.alpha * 2 - 1, beta, a.theta / np.pi - 1])
        return np.clip(v, -1.0, 1.0)

    def dis_vector(self, a: HybridAction) -> np.ndarray:
        parts = [a.f.astype(int), a.claims.astype(int), [a.u_level]]
        if self.n_cells:
            parts.append([a.haps_cell])
        return np.concatenate(parts).astype(int)

    def onehot(self, dis: np.ndarray) -> np.ndarray:
        out = np.zeros(self.onehot_dim)
        off = 0
        for i, n in enumerate(self.heads):
            out[off + int(dis[i])] = 1.0
            off += n
        return out

    def from_onehot(self, x: np.ndarray) -> np.ndarray:
        idx, off = [], 0
        for n in self.heads:
            idx.append(int(np.argmax(x[off:off + n])))
            off += n
        return np.array(idx)

    def compute_capability(self, level: int, u_max: float) -> float:
        return u_max * (level + 1) / self.u_levels

    def zero_action(self) -> HybridAction:
        K, M = self.K, self.M
        return HybridAction(np.zeros((K, self.N), complex), np.ones(M), np.zeros(M), np.zeros(M),
                            np.zeros(M), np.zeros(K), np.ones(K), 0, 0 if self.n_cells else -1)


def project_joint(actions: list, codecs: list, tol: float = 1e-12) -> list:
    """Feasible copy of a joint action.

    Order: clip surface settings, resolve association conflicts (highest
    score wins, ties to the lower node index), silence beams of users a node
    does not serve, then scale to the power budget.
    """
    out = [a.copy() for a in actions]
    for a, c in zip(out, codecs):
        a.alpha = np.clip(a.alpha, 0.0, 1.0)
        a.beta = np.clip(a.beta, 0.0, c.beta_max)
        a.theta = np.mod(a.theta, 2 * np.pi)
        a.theta[a.theta >= 2 * np.pi] = 0.0
        a.f = (np.asarray(a.f) >= 0.5).astype(float)
        a.claims = (np.asarray(a.claims) >= 0.5).astype(float)
        a.u_level = int(np.clip(a.u_level, 0, c.u_levels - 1))
        a.haps_cell = int(np.clip(a.haps_cell, 0, c.n_cells - 1)) if c.n_cells else -1
    K = out[0].claims.shape[0]
    for k in range(K):
        best = -1
        for i, a in enumerate(out):
            if a.claims[k] and (best < 0 or a.scores[k] > out[best].scores[k]):
                best = i
        for i, a in enumerate(out):
            a.claims[k] = 1.0 if i == best else 0.0
    for a, c in zip(out, codecs):
        a.w = a.w * a.claims[:, None]
        total = float(np.sum(np.abs(a.w) ** 2))
        if total > c.p_max * (1 + tol):
            a.w = a.w * np.sqrt(c.p_max / total)
    return out


@dataclass
class ActionClamp:
    """Fixed-configuration overrides applied after projection."""
    no_ris: bool = False
    alpha: float | None = None
    beta_cap: float | None = None
    element_masks: list | None = None   # per node, fixed on/off pattern
    haps_cells: dict | None = None      # node index -> frozen cell

    def apply(self, actions: list) -> list:
        out = [a.copy() for a in actions]
        for i, a in enumerate(out):
            if self.alpha is not None:
                a.alpha = np.full_like(a.alpha, self.alpha)
            if self.beta_cap is not None:
                a.beta = np.minimum(a.beta, self.beta_cap)
            if self.element_masks is not None:
                a.f = self.element_masks[i].astype(float).copy()
            if self.no_ris:
                a.f = np.zeros_like(a.f)
            if self.haps_cells is not None and i in self.haps_cells:
                a.haps_cell = self.haps_cells[i]
        return out
