"""Twin hybrid DQN/DDPG learners with compressed parametrized sharing."""
from __future__ import annotations

import numpy as np

from .agents import DdpgAgent, DqnAgent, ReplayBuffer
from .pretrain import Compressors

COMBOS = ((0, 0), (0, 1), (1, 0), (1, 1))  # (continuous source, discrete source); ties keep the earliest


def symlog(x):
    return np.sign(x) * np.log1p(np.abs(x))


def learning_reward(r: float, kind: str) -> float:
    """Reward fed to the learners; reported metrics always use the raw value."""
    if kind == "symlog":
        return float(symlog(r))
    if kind == "none":
        return float(r)
    raise ValueError(f"unknown reward transform {kind!r}")


def sub_rngs(seed: int, agent: int, n: int) -> list[np.random.Generator]:
    """Independent streams for the sub-networks of one agent."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence([seed, 17, agent]).spawn(n)]


def claim_scores(qv: np.ndarray, codec) -> np.ndarray:
    """Claim strength per user: Q(claim) - Q(no claim) of the claim heads."""
    off = 2 * codec.M
    q = qv[off:off + 2 * codec.K].reshape(codec.K, 2)
    return q[:, 1] - q[:, 0]


def make_dqn(acfg, obs_dim, heads, rng):
    return DqnAgent(obs_dim, heads, tuple(acfg.hidden), acfg.lr_dqn, acfg.gamma, acfg.tau_dqn,
                    acfg.eps_start, acfg.eps_end, acfg.eps_decay_steps, acfg.optimizer, acfg.grad_clip, rng)


def make_ddpg(acfg, obs_dim, act_dim, bound, rng):
    return DdpgAgent(obs_dim, act_dim, tuple(acfg.hidden), acfg.lr_actor, acfg.lr_critic, acfg.gamma,
                     acfg.tau_actor, acfg.tau_critic, acfg.noise_std, acfg.noise_decay, bound,
                     acfg.optimizer, acfg.grad_clip, rng)


class SubLearner:
    """One network pair member plus its memory and pending transition."""

    def __init__(self, agent, buffer: ReplayBuffer, rng: np.random.Generator, batch_size: int):
        self.agent = agent
        self.buffer = buffer
        self.rng = rng
        self.batch_size = batch_size
        self.pending = None  # (input, action, reward)

    def stage(self, o, a) -> None:
        self.pending = [np.asarray(o, dtype=float), np.asarray(a), None]

    def reward(self, r: float) -> None:
        if self.pending is not None:
            self.pending[2] = r

    def flush(self, next_o) -> None:
        if self.pending is not None and self.pending[2] is not None:
            o, a, r = self.pending
            self.buffer.push(o, a, r, next_o)
        self.pending = None

    def learn(self) -> None:
        if len(self.buffer) >= self.batch_size:
            self.agent.update(self.buffer.sample(self.batch_size, self.rng))


class ChimeraAgent:
    """Primal and dual DQN/DDPG pairs of one node.

    Input layout (all compressed):
        dual DQN     [z_s, z_con*]        previous slot's chosen continuous code
        primal DDPG  [z_s, z~dis_dual]    this slot's dual-DQN proposal
        primal DQN   [z_s, z~con_primal]  this slot's primal-DDPG proposal
        dual DDPG    [z_s, z_dis*]        previous slot's chosen discrete code
    With ``twin=False`` only one DQN and one DDPG remain, both fed the
    previous slot's chosen codes.
    """

    def __init__(self, idx: int, codec, comp: Compressors, acfg, seed: int, twin: bool = True):
        self.idx, self.codec, self.comp, self.twin = idx, codec, comp, twin
        ls, lc, ld = comp.state_dim, comp.cont_dim, comp.dis_dim
        n_pairs = 2 if twin else 1
        rngs = sub_rngs(seed, idx, 4 * n_pairs)
        self.dqn, self.ddpg = [], []
        for p in range(n_pairs):
            q = make_dqn(acfg, ls + lc, codec.heads, rngs[4 * p])
            self.dqn.append(SubLearner(q, ReplayBuffer(acfg.buffer_size, ls + lc, len(codec.heads), int),
                                       rngs[4 * p + 1], acfg.batch_size))
            d = make_ddpg(acfg, ls + ld, lc, comp.cont_bound, rngs[4 * p + 2])
            self.ddpg.append(SubLearner(d, ReplayBuffer(acfg.buffer_size, ls + ld, lc), rngs[4 * p + 3],
                                        acfg.batch_size))
        self.reset_cache()

    @property
    def subs(self) -> list[SubLearner]:
        return self.dqn + self.ddpg

    def reset_cache(self) -> None:
        self.z_con_star = np.zeros(self.comp.cont_dim)
        self.z_dis_star = np.zeros(self.comp.dis_dim)

    def _dis_code(self, dis) -> np.ndarray:
        return self.comp.encode_dis(self.codec.onehot(dis))

    def propose(self, obs, explore: bool):
        """Return (inputs per sub-learner, actions per sub-learner, candidate list).

        Candidates are (continuous code, discrete indices, claim scores) in
        COMBOS order.
        """
        z_s = self.comp.encode_state(obs)
        if not self.twin:
            o_dis = np.concatenate([z_s, self.z_con_star])
            dis, qv = self.dqn[0].agent.select(o_dis, explore)
            o_con = np.concatenate([z_s, self.z_dis_star])
            con = self.ddpg[0].agent.select(o_con, explore)
            return [o_dis, o_con], [dis, con], [(con, dis, claim_scores(qv, self.codec))]
        o_dis2 = np.concatenate([z_s, self.z_con_star])
        dis2, q2 = self.dqn[1].agent.select(o_dis2, explore)
        o_con1 = np.concatenate([z_s, self._dis_code(dis2)])
        con1 = self.ddpg[0].agent.select(o_con1, explore)
        o_dis1 = np.concatenate([z_s, con1])
        dis1, q1 = self.dqn[0].agent.select(o_dis1, explore)
        o_con2 = np.concatenate([z_s, self.z_dis_star])
        con2 = self.ddpg[1].agent.select(o_con2, explore)
        cons, diss = (con1, con2), ((dis1, q1), (dis2, q2))
        cands = [(cons[c], diss[d][0], claim_scores(diss[d][1], self.codec)) for c, d in COMBOS]
        return [o_dis1, o_dis2, o_con1, o_con2], [dis1, dis2, con1, con2], cands

    def to_action(self, cand):
        con, dis, scores = cand
        return self.codec.build(self.comp.decode_cont(con), dis, scores)

    def commit(self, cand) -> None:
        con, dis, _ = cand
        self.z_con_star = np.array(con, dtype=float)
        self.z_dis_star = self._dis_code(dis)


def select_best(rewards) -> int:
    """Index of the best probe; ties keep the earliest entry of COMBOS."""
    best = 0
    for i in range(1, len(rewards)):
        if rewards[i] > rewards[best]:
            best = i
    return best


class ChimeraLearner:
    """Multi-agent driver: propose, probe, commit, store, update."""

    name = "chimera"

    def __init__(self, env, compressors, acfg, seed: int, twin: bool = True):
        self.env = env
        self.acfg = acfg
        self.agents = [ChimeraAgent(i, env.codecs[i], compressors[i], acfg, seed, twin)
                       for i in range(env.n_agents)]
        self.last_choice = [0] * env.n_agents

    def begin_episode(self, obs) -> None:
        for ag in self.agents:
            ag.reset_cache()
            for s in ag.subs:
                s.pending = None

    def _flush_and_stage(self, ag, inputs, actions):
        for s, o, a in zip(self._sub_order(ag), inputs, actions):
            s.flush(o)
            s.stage(o, a)

    @staticmethod
    def _sub_order(ag):
        if ag.twin:
            return [ag.dqn[0], ag.dqn[1], ag.ddpg[0], ag.ddpg[1]]
        return [ag.dqn[0], ag.ddpg[0]]

    def act(self, env, obs, explore: bool = True):
        frozen = list(env.committed)
        chosen = []
        for i, ag in enumerate(self.agents):
            inputs, actions, cands = ag.propose(obs[i], explore)
            if explore:
                self._flush_and_stage(ag, inputs, actions)
            if len(cands) == 1:
                k = 0
            else:
                k = select_best([env.probe_reward(i, ag.to_action(c), frozen) for c in cands])
            self.last_choice[i] = k
            chosen.append(cands[k])
        for ag, c in zip(self.agents, chosen):
            ag.commit(c)
        return [ag.to_action(c) for ag, c in zip(self.agents, chosen)]

    def observe(self, rewards, next_obs, done: bool) -> None:
        tf = self.acfg.reward_transform
        for ag, r in zip(self.agents, rewards):
            for s in ag.subs:
                s.reward(learning_reward(r, tf))
        if done:
            # close the episode with inputs built from a noise-free proposal
            for i, ag in enumerate(self.agents):
                inputs, _, _ = ag.propose(next_obs[i], explore=False)
                for s, o in zip(self._sub_order(ag), inputs):
                    s.flush(o)
        for ag in self.agents:
            for s in ag.subs:
                s.learn()

    def end_episode(self) -> None:
        for ag in self.agents:
            for s in ag.ddpg:
                s.agent.end_episode()

    def nets(self) -> dict:
        out = {}
        for ag in self.agents:
            names = (["dqn_primal", "dqn_dual", "ddpg_primal", "ddpg_dual"] if ag.twin
                     else ["dqn", "ddpg"])
            out[f"agent{ag.idx}"] = {n: s.agent.nets() for n, s in zip(names, self._sub_order(ag))}
        return out
