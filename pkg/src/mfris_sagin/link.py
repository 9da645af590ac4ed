"""SINR, rates and per-node latency."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT


@dataclass
class LinkReport:
    sinr: np.ndarray   # (n, K)
    rate: np.ndarray   # (n, K) bits/s/Hz
    t_cp: np.ndarray   # (n,)
    t_tr: np.ndarray
    t_pr: np.ndarray

    @property
    def t_tot(self) -> np.ndarray:
        return self.t_cp + self.t_tr + self.t_pr


def gain_tensor(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """A[i, k, k'] = |g[i, k] . w[i, k']|^2."""
    return np.abs(np.einsum("ikn,ijn->ikj", g, w)) ** 2


def sinr_all(g: np.ndarray, w: np.ndarray, delta: np.ndarray, noise_power: float) -> np.ndarray:
    """Per (node, user) SINR with intra-node and cross-node interference.

    Cross-node interference from beam k' of node j counts only when k' is not
    served by the receiving node i, matching the (1 - delta) gate.
    """
    if g.shape != w.shape or delta.shape != g.shape[:2]:
        raise ValueError("g, w and delta shapes disagree")
    n, K, _ = g.shape
    A = gain_tensor(g, w)
    own = np.einsum("ikk->ik", A)
    signal = delta * own
    # intra-node: sum over k' != k of delta[i,k'] A[i,k,k']
    z1 = np.einsum("ikj,ij->ik", A, delta) - delta * own
    # other nodes: sum_j!=i sum_k'!=k (1 - delta[i,k']) A[j,k,k']
    offdiag = A * (1.0 - np.eye(K))[None]                    # zero k' == k
    per_node = np.einsum("jkm,im->ijk", offdiag, 1.0 - delta)
    z23 = per_node.sum(axis=1) - np.einsum("iik->ik", per_node)
    return signal / (z1 + z23 + noise_power)


def rate(gamma):
    return np.log2(1.0 + np.asarray(gamma))


def latencies(delta: np.ndarray, data_bits: float, U: np.ndarray, rates: np.ndarray, bandwidth: float,
              distances: np.ndarray, cycles_per_bit: float = 1.0):
    """(t_cp, t_tr, t_pr) per node. Empty averages are 0."""
    delta = np.asarray(delta, dtype=float)
    U = np.asarray(U, dtype=float)
    served = delta.sum(axis=1)
    if np.any((served > 0) & (U <= 0)):
        raise ValueError("zero compute capability")
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cp = np.where(served > 0, served * cycles_per_bit * data_bits / np.where(U > 0, U, 1.0), 0.0)
        ok = (delta > 0) & (rates > 0)
        per_user = np.where(ok, data_bits / (bandwidth * np.where(rates > 0, rates, 1.0)), 0.0)
    t_tr = np.where(served > 0, per_user.sum(axis=1) / np.maximum(served, 1), 0.0)
    t_pr = np.where(served > 0, (delta * distances).sum(axis=1) / np.maximum(served, 1) / SPEED_OF_LIGHT, 0.0)
    return t_cp, t_tr, t_pr


def link_report(g, w, delta, noise_power, data_bits, U, bandwidth, distances, cycles_per_bit=1.0) -> LinkReport:
    gamma = sinr_all(g, w, delta, noise_power)
    R = rate(gamma)
    t_cp, t_tr, t_pr = latencies(delta, data_bits, U, R, bandwidth, distances, cycles_per_bit)
    return LinkReport(gamma, R, t_cp, t_tr, t_pr)
