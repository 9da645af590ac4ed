"""Offline data collection and training of the per-agent compressors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import SaginEnv
from .vae import GaussianVAE, GumbelVAE, IdentityCompressor, nmse


def sample_continuous_prior(codec, n: int, rng: np.random.Generator, kind: str = "structured") -> np.ndarray:
    """Continuous action vectors in [-1, 1]^d.

    'uniform' draws every coordinate independently. 'structured' draws
    actions from parametric families: one steered beam per user with its own
    amplitude and phase, one reflection share and one gain per surface, and a
    linear phase ramp across the element grid.
    """
    d = codec.cont_dim
    if kind == "uniform":
        return rng.uniform(-1.0, 1.0, (n, d))
    if kind != "structured":
        raise ValueError(f"unknown action prior {kind!r}")
    K, N, M = codec.K, codec.N, codec.M
    amp = rng.uniform(0.0, 1.0, (n, K, 1))
    psi = rng.uniform(-1.0, 1.0, (n, K, 1))
    phase = rng.uniform(0.0, 2 * np.pi, (n, K, 1))
    w = amp * np.exp(1j * (phase - np.pi * np.arange(N)[None, None, :] * psi))
    w = w.reshape(n, K * N)
    alpha = np.repeat(rng.uniform(-1.0, 1.0, (n, 1)), M, axis=1)
    beta = np.repeat(rng.uniform(-1.0, 1.0, (n, 1)), M, axis=1)
    m_h = max(1, int(round(np.sqrt(M))))
    while M % m_h:
        m_h -= 1
    gh, gv = np.meshgrid(np.arange(m_h), np.arange(M // m_h), indexing="ij")
    u, v = rng.uniform(-1.0, 1.0, (n, 1)), rng.uniform(-1.0, 1.0, (n, 1))
    t0 = rng.uniform(0.0, 2 * np.pi, (n, 1))
    theta = np.mod(t0 + np.pi * (u * gh.ravel()[None] + v * gv.ravel()[None]), 2 * np.pi)
    return np.hstack([w.real, w.imag, alpha, beta, theta / np.pi - 1.0])


def sample_discrete_prior(codec, n: int, rng: np.random.Generator) -> np.ndarray:
    """One-hot encoded uniform draws of every discrete head."""
    idx = np.column_stack([rng.integers(0, h, n) for h in codec.heads])
    return np.stack([codec.onehot(r) for r in idx])


def collect_states(cfg, n: int, seed: int) -> list[np.ndarray]:
    """Observations from uniform-random rollouts, one array per agent."""
    env = SaginEnv(cfg)
    rng = np.random.default_rng([seed, 3])
    out = [[] for _ in range(env.n_agents)]
    ep = 0
    while len(out[0]) < n:
        obs = env.reset(seed * 100_003 + ep)
        done = False
        while not done and len(out[0]) < n:
            for i, o in enumerate(obs):
                out[i].append(o)
            acts = [c.build(rng.uniform(-1, 1, c.cont_dim), [rng.integers(h) for h in c.heads])
                    for c in env.codecs]
            obs, _, _, done = env.step(acts)
        ep += 1
    return [np.array(x) for x in out]


@dataclass
class Compressors:
    """State, continuous-action and discrete-action models of one agent."""
    state: object
    cont: object
    dis: object
    cont_bound: float = 1.0

    @property
    def state_dim(self) -> int:
        return self.state.latent_dim_

    @property
    def cont_dim(self) -> int:
        return self.cont.latent_dim_

    @property
    def dis_dim(self) -> int:
        return self.dis.latent_dim_

    def encode_state(self, o) -> np.ndarray:
        return self.state.transform(np.atleast_2d(o))[0]

    def encode_cont(self, a) -> np.ndarray:
        return self.cont.transform(np.atleast_2d(a))[0]

    def decode_cont(self, z) -> np.ndarray:
        return self.cont.inverse_transform(np.atleast_2d(z))[0]

    def encode_dis(self, onehot) -> np.ndarray:
        return self.dis.transform(np.atleast_2d(onehot))[0]


def identity_compressors(env: SaginEnv) -> list[Compressors]:
    return [Compressors(IdentityCompressor().fit_dim(env.obs_dim), IdentityCompressor().fit_dim(c.cont_dim),
                        IdentityCompressor().fit_dim(c.onehot_dim), 1.0)
            for c in env.codecs]


def _split(X, holdout, rng):
    idx = rng.permutation(len(X))
    n_test = max(1, int(round(holdout * len(X))))
    return X[idx[n_test:]], X[idx[:n_test]]


def pretrain_compressors(cfg, seed: int, states=None, ratios=None):
    """Fit the three models for every agent.

    Returns (list of Compressors, report rows). Each report row holds the
    held-out reconstruction quality of one model.
    """
    v = cfg.vae
    env = SaginEnv(cfg)
    ratios = ratios or (v.ratio_state, v.ratio_continuous, v.ratio_discrete)
    if states is None:
        states = collect_states(cfg, v.n_samples, seed)
    rng = np.random.default_rng([seed, 5])
    common = dict(hidden=tuple(v.hidden), epochs=v.epochs, batch_size=v.batch_size, lr=v.lr,
                  kl_weight=v.kl_weight)
    models, report = [], []
    for i, codec in enumerate(env.codecs):
        s_tr, s_te = _split(states[i], v.holdout, rng)
        c_all = sample_continuous_prior(codec, v.n_samples, rng, v.action_prior)
        c_tr, c_te = _split(c_all, v.holdout, rng)
        d_all = sample_discrete_prior(codec, v.n_samples, rng)
        d_tr, d_te = _split(d_all, v.holdout, rng)
        seeds = rng.integers(0, 2**31 - 1, 3)
        sm = _fit_gauss(s_tr, ratios[0], common, seeds[0])
        cm = _fit_gauss(c_tr, ratios[1], common, seeds[1])
        if ratios[2] >= 1.0:
            dm = IdentityCompressor().fit(d_tr)
        else:
            dm = GumbelVAE(blocks=tuple(codec.heads), ratio=ratios[2], temperature_start=v.temperature_start,
                           temperature_end=v.temperature_end, input_skip=v.input_skip,
                           random_state=int(seeds[2]), **common).fit(d_tr)
        bound = 1.0
        if not isinstance(cm, IdentityCompressor):
            bound = float(np.percentile(np.abs(cm.transform(c_tr)), 99.5))
        models.append(Compressors(sm, cm, dm, bound))
        gumbel = isinstance(dm, GumbelVAE)
        dm_acc = dm.block_accuracy(d_te) if gumbel else 1.0
        report += [
            {"agent": i, "model": "state", "ratio": ratios[0], "latent": sm.latent_dim_,
             "nmse": nmse(s_te, sm.inverse_transform(sm.transform(s_te))), "block_accuracy": ""},
            {"agent": i, "model": "continuous", "ratio": ratios[1], "latent": cm.latent_dim_,
             "nmse": nmse(c_te, cm.inverse_transform(cm.transform(c_te))), "block_accuracy": ""},
            {"agent": i, "model": "discrete", "ratio": ratios[2], "latent": dm.latent_dim_,
             "nmse": "", "block_accuracy": dm_acc, "cross_entropy": dm.score_ce(d_te) if gumbel else 0.0},
        ]
    return models, report


def _fit_gauss(X, ratio, common, seed):
    if ratio >= 1.0:
        return IdentityCompressor().fit(X)
    return GaussianVAE(ratio=ratio, random_state=int(seed), **common).fit(X)
