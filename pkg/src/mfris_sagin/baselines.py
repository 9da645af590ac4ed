"""Comparison methods: single hybrid pair, DQN-only, DDPG-only, GA, ZF/MMSE."""
from __future__ import annotations

import numpy as np

from .agents import ReplayBuffer
from .channel import combined_channel
from .chimera import SubLearner, claim_scores, learning_reward, make_ddpg, make_dqn, sub_rngs

# --------------------------------------------------------------------- helpers


def heads_from_continuous(x: np.ndarray, heads) -> np.ndarray:
    """Threshold one scalar per head: binary at 0, multi-level by equal bins."""
    out = np.empty(len(heads), dtype=int)
    for i, n in enumerate(heads):
        if n == 2:
            out[i] = int(x[i] > 0)
        else:
            out[i] = int(np.clip(np.floor((x[i] + 1) / 2 * n), 0, n - 1))
    return out


def quantize_levels(idx: np.ndarray, levels: int) -> np.ndarray:
    return -1.0 + 2.0 * np.asarray(idx, dtype=float) / (levels - 1)


class _SlotLearner:
    """Learners whose next input is known right after the step."""

    name = "base"

    def begin_episode(self, obs) -> None:
        for s in self.subs:
            s.pending = None

    def end_episode(self) -> None:
        for s in self.subs:
            if hasattr(s.agent, "end_episode"):
                s.agent.end_episode()


# ------------------------------------------------------------- hybrid (single)


class HybridSingleLearner(_SlotLearner):
    """Per-node DQN + DDPG sharing their previous actions, no twins, no compression.

    DQN input [o, last continuous action]; DDPG input [o, last discrete one-hot].
    """

    name = "hybrid_single"

    def __init__(self, env, acfg, seed: int):
        self.env, self.acfg = env, acfg
        self.codecs = env.codecs
        self.dqn, self.ddpg = [], []
        od = env.obs_dim
        for i, c in enumerate(env.codecs):
            r = sub_rngs(seed, i, 4)
            q = make_dqn(acfg, od + c.cont_dim, c.heads, r[0])
            self.dqn.append(SubLearner(q, ReplayBuffer(acfg.buffer_size, od + c.cont_dim, len(c.heads), int),
                                       r[1], acfg.batch_size))
            d = make_ddpg(acfg, od + c.onehot_dim, c.cont_dim, 1.0, r[2])
            self.ddpg.append(SubLearner(d, ReplayBuffer(acfg.buffer_size, od + c.onehot_dim, c.cont_dim),
                                        r[3], acfg.batch_size))
        self.last_con = [np.zeros(c.cont_dim) for c in env.codecs]
        self.last_dis = [np.zeros(c.onehot_dim) for c in env.codecs]

    @property
    def subs(self):
        return self.dqn + self.ddpg

    def begin_episode(self, obs) -> None:
        super().begin_episode(obs)
        self.last_con = [np.zeros(c.cont_dim) for c in self.codecs]
        self.last_dis = [np.zeros(c.onehot_dim) for c in self.codecs]

    def act(self, env, obs, explore: bool = True):
        out = []
        for i, c in enumerate(self.codecs):
            o_dis = np.concatenate([obs[i], self.last_con[i]])
            dis, qv = self.dqn[i].agent.select(o_dis, explore)
            o_con = np.concatenate([obs[i], self.last_dis[i]])
            con = self.ddpg[i].agent.select(o_con, explore)
            if explore:
                for s, o, a in ((self.dqn[i], o_dis, dis), (self.ddpg[i], o_con, con)):
                    s.flush(o)
                    s.stage(o, a)
            self.last_con[i] = np.array(con, dtype=float)
            self.last_dis[i] = c.onehot(dis)
            out.append(c.build(con, dis, claim_scores(qv, c)))
        return out

    def observe(self, rewards, next_obs, done: bool) -> None:
        for i, r in enumerate(rewards):
            v = learning_reward(r, self.acfg.reward_transform)
            self.dqn[i].reward(v)
            self.ddpg[i].reward(v)
        if done:
            for i in range(len(self.codecs)):
                self.dqn[i].flush(np.concatenate([next_obs[i], self.last_con[i]]))
                self.ddpg[i].flush(np.concatenate([next_obs[i], self.last_dis[i]]))
        for s in self.subs:
            s.learn()

    def nets(self) -> dict:
        return {f"agent{i}": {"dqn": self.dqn[i].agent.nets(), "ddpg": self.ddpg[i].agent.nets()}
                for i in range(len(self.codecs))}


# ------------------------------------------------------------------- DQN only


class CentralDqnLearner(_SlotLearner):
    """One DQN over all nodes; continuous dims quantised to a few levels each."""

    name = "central_dqn"

    def __init__(self, env, acfg, seed: int):
        self.env, self.acfg, self.codecs = env, acfg, env.codecs
        self.levels = acfg.quant_levels
        heads = []
        for c in env.codecs:
            heads += list(c.heads) + [self.levels] * c.cont_dim
        self.heads = heads
        r = sub_rngs(seed, 1000, 2)
        od = env.obs_dim * env.n_agents
        self.sub = SubLearner(make_dqn(acfg, od, heads, r[0]),
                              ReplayBuffer(acfg.buffer_size, od, len(heads), int), r[1], acfg.batch_size)
        self.subs = [self.sub]

    def _split(self, idx, qv):
        out, off, qoff = [], 0, 0
        for c in self.codecs:
            nh = len(c.heads)
            dis = idx[off:off + nh]
            con = quantize_levels(idx[off + nh:off + nh + c.cont_dim], self.levels)
            qs = qv[qoff:qoff + int(sum(c.heads))]
            out.append(c.build(con, dis, claim_scores(qs, c)))
            off += nh + c.cont_dim
            qoff += int(sum(c.heads)) + self.levels * c.cont_dim
        return out

    def act(self, env, obs, explore: bool = True):
        o = np.concatenate(obs)
        idx, qv = self.sub.agent.select(o, explore)
        if explore:
            self.sub.stage(o, idx)
        return self._split(idx, qv)

    def observe(self, rewards, next_obs, done: bool) -> None:
        self.sub.reward(learning_reward(float(np.sum(rewards)), self.acfg.reward_transform))
        self.sub.flush(np.concatenate(next_obs))
        self.sub.learn()

    def nets(self) -> dict:
        return {"central": {"dqn": self.sub.agent.nets()}}


# ------------------------------------------------------------------ DDPG only


class _DdpgPolicy:
    @staticmethod
    def split_output(c, x):
        con = x[:c.cont_dim]
        raw = x[c.cont_dim:]
        dis = heads_from_continuous(raw, c.heads)
        scores = raw[c.M:c.M + c.K]
        return c.build(con, dis, scores)


class MaddpgLearner(_SlotLearner, _DdpgPolicy):
    """Per-node DDPG; discrete heads come from thresholded extra outputs."""

    name = "maddpg"

    def __init__(self, env, acfg, seed: int):
        self.env, self.acfg, self.codecs = env, acfg, env.codecs
        self.subs = []
        for i, c in enumerate(env.codecs):
            r = sub_rngs(seed, i, 2)
            ad = c.cont_dim + len(c.heads)
            self.subs.append(SubLearner(make_ddpg(acfg, env.obs_dim, ad, 1.0, r[0]),
                                        ReplayBuffer(acfg.buffer_size, env.obs_dim, ad), r[1], acfg.batch_size))

    def act(self, env, obs, explore: bool = True):
        out = []
        for i, c in enumerate(self.codecs):
            x = self.subs[i].agent.select(obs[i], explore)
            if explore:
                self.subs[i].stage(obs[i], x)
            out.append(self.split_output(c, x))
        return out

    def observe(self, rewards, next_obs, done: bool) -> None:
        for s, r, o2 in zip(self.subs, rewards, next_obs):
            s.reward(learning_reward(r, self.acfg.reward_transform))
            s.flush(o2)
            s.learn()

    def nets(self) -> dict:
        return {f"agent{i}": {"ddpg": s.agent.nets()} for i, s in enumerate(self.subs)}


class CentralDdpgLearner(_SlotLearner, _DdpgPolicy):
    """One DDPG over all nodes, rewarded with the network-wide sum."""

    name = "central_ddpg"

    def __init__(self, env, acfg, seed: int):
        self.env, self.acfg, self.codecs = env, acfg, env.codecs
        self.dims = [c.cont_dim + len(c.heads) for c in env.codecs]
        od = env.obs_dim * env.n_agents
        r = sub_rngs(seed, 1001, 2)
        self.sub = SubLearner(make_ddpg(acfg, od, sum(self.dims), 1.0, r[0]),
                              ReplayBuffer(acfg.buffer_size, od, sum(self.dims)), r[1], acfg.batch_size)
        self.subs = [self.sub]

    def act(self, env, obs, explore: bool = True):
        o = np.concatenate(obs)
        x = self.sub.agent.select(o, explore)
        if explore:
            self.sub.stage(o, x)
        out, off = [], 0
        for c, d in zip(self.codecs, self.dims):
            out.append(self.split_output(c, x[off:off + d]))
            off += d
        return out

    def observe(self, rewards, next_obs, done: bool) -> None:
        self.sub.reward(learning_reward(float(np.sum(rewards)), self.acfg.reward_transform))
        self.sub.flush(np.concatenate(next_obs))
        self.sub.learn()

    def nets(self) -> dict:
        return {"central": {"ddpg": self.sub.agent.nets()}}


# -------------------------------------------------------------------------- GA


def ga_optimize(fitness, seed_genome, heads, population: int, generations: int, rng,
                elite: float = 0.1, mutation: float = 0.05):
    """Maximise ``fitness(cont, dis)`` over cont in [-1, 1]^d and dis in prod(heads).

    The seed genome joins the initial population; the rest is uniform.
    Returns (best genome, best fitness).
    """
    cont0, dis0 = (np.asarray(seed_genome[0], dtype=float), np.asarray(seed_genome[1], dtype=int))
    d, heads = len(cont0), np.asarray(heads, dtype=int)
    pop_c = [np.clip(cont0, -1, 1)] + [rng.uniform(-1, 1, d) for _ in range(population - 1)]
    pop_d = [dis0.copy()] + [np.array([rng.integers(h) for h in heads], dtype=int) for _ in range(population - 1)]
    fit = np.array([fitness(c, x) for c, x in zip(pop_c, pop_d)])
    best = int(np.argmax(fit))
    best_g, best_f = (pop_c[best].copy(), pop_d[best].copy()), float(fit[best])
    n_elite = max(1, int(round(elite * population)))
    for _ in range(generations - 1):
        order = np.argsort(-fit, kind="stable")
        parents = order[:max(2, population // 2)]
        new_c = [pop_c[i].copy() for i in order[:n_elite]]
        new_d = [pop_d[i].copy() for i in order[:n_elite]]
        while len(new_c) < population:
            a, b = rng.choice(parents, 2, replace=len(parents) < 2)
            mc, md = rng.random(d) < 0.5, rng.random(len(heads)) < 0.5
            child_c = np.where(mc, pop_c[a], pop_c[b])
            child_d = np.where(md, pop_d[a], pop_d[b])
            mut_c = rng.random(d) < mutation
            child_c = np.where(mut_c, rng.uniform(-1, 1, d), child_c)
            mut_d = rng.random(len(heads)) < mutation
            child_d = np.where(mut_d, [rng.integers(h) for h in heads], child_d).astype(int)
            new_c.append(child_c)
            new_d.append(child_d)
        pop_c, pop_d = new_c, new_d
        fit = np.array([fitness(c, x) for c, x in zip(pop_c, pop_d)])
        i = int(np.argmax(fit))
        if fit[i] > best_f:
            best_g, best_f = (pop_c[i].copy(), pop_d[i].copy()), float(fit[i])
    return best_g, best_f


class GaLearner(_SlotLearner):
    """Re-optimises every node's action each slot from scratch (no learning)."""

    name = "ga"

    def __init__(self, env, mcfg, seed: int):
        self.mcfg = mcfg
        self.rng = np.random.default_rng([seed, 23])
        self.subs = []

    def act(self, env, obs, explore: bool = True):
        frozen = list(env.committed)
        out = []
        for i, c in enumerate(env.codecs):
            seed_g = (c.cont_vector(frozen[i]), c.dis_vector(frozen[i]))

            def fit(cont, dis, i=i, c=c):
                return env.probe_reward(i, c.build(cont, dis), frozen)

            (cont, dis), _ = ga_optimize(fit, seed_g, c.heads, self.mcfg.population, self.mcfg.generations,
                                         self.rng, self.mcfg.elite, self.mcfg.mutation)
            out.append(c.build(cont, dis))
        return out

    def observe(self, rewards, next_obs, done: bool) -> None:
        pass

    def nets(self) -> dict:
        return {}


# ------------------------------------------------------------------- ZF / MMSE


def _scale(W, p_max):
    tot = float(np.sum(np.abs(W) ** 2))
    return W if tot == 0 else W * np.sqrt(p_max / tot)


def zf_beamform(G: np.ndarray, p_max: float) -> np.ndarray:
    """Zero-forcing beams, one row per user of G (K x N), total power p_max."""
    return _scale(np.linalg.pinv(G).T, p_max)


def mmse_beamform(G: np.ndarray, noise: float, p_max: float) -> np.ndarray:
    """Regularised inverse with noise loading K * noise / p_max."""
    K, N = G.shape
    A = G.conj().T @ G + (K * noise / p_max) * np.eye(N)
    return _scale(np.linalg.solve(A, G.conj().T).T, p_max)


class LinearPrecodingPolicy(_SlotLearner):
    """Closed-form beams on the current combined channel.

    Every user is assigned to the node with the strongest combined channel,
    surfaces stay off, and compute runs at the top level.
    """

    def __init__(self, env, kind: str):
        if kind not in ("zf", "mmse"):
            raise ValueError(kind)
        self.kind = kind
        self.name = kind
        self.subs = []

    def act(self, env, obs, explore: bool = True):
        coeffs = np.stack([a.coefficients() for a in env.committed])
        g = combined_channel(env.channels, coeffs)
        owner = np.argmax(np.linalg.norm(g, axis=2), axis=0)
        out = []
        for i, c in enumerate(env.codecs):
            a = c.zero_action()
            users = np.flatnonzero(owner == i)
            if len(users):
                G = g[i, users]
                W = (zf_beamform(G, c.p_max) if self.kind == "zf"
                     else mmse_beamform(G, env.noise, c.p_max))
                a.w[users] = W
                a.claims[users] = 1.0
            a.u_level = c.u_levels - 1
            if c.n_cells:
                a.haps_cell = env.committed[i].haps_cell
            out.append(a)
        return out

    def observe(self, rewards, next_obs, done: bool) -> None:
        pass

    def nets(self) -> dict:
        return {}
