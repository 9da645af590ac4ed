"""Replay memory, factorized-head DQN and DDPG learners."""
from __future__ import annotations

import numpy as np

from .neural import MLP, Optimizer, soft_update


class ReplayBuffer:
    """FIFO experience memory of (obs, action, reward, next_obs)."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, act_dtype=float):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim), dtype=act_dtype)
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, o, a, r, o2) -> None:
        i = self.ptr
        self.obs[i], self.act[i], self.rew[i], self.next_obs[i] = o, a, r, o2
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        """Uniform mini-batch, no repeats inside one batch."""
        if batch > self.size:
            raise ValueError(f"cannot draw {batch} samples from {self.size} stored")
        idx = rng.choice(self.size, size=batch, replace=False)
        # position 0 is the oldest entry once the ring is full
        idx = (idx + (self.ptr if self.size == self.capacity else 0)) % self.capacity
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx]


def linear_epsilon(step: int, start: float, end: float, decay_steps: int) -> float:
    if decay_steps <= 0:
        return end
    if step >= decay_steps:
        return end
    return start + step / decay_steps * (end - start)


class DqnAgent:
    """Q-network with one value head per discrete sub-action.

    The joint argmax is taken head by head; the bootstrap target shares one
    value across heads, r + gamma * mean_h max_a Q'_h(o', a).
    """

    def __init__(self, obs_dim, heads, hidden=(256, 256), lr=1e-3, gamma=0.99, tau=1e-2,
                 eps_start=1.0, eps_end=0.1, eps_decay_steps=10_000, optimizer="sgd", grad_clip=None,
                 rng=None):
        self.rng = np.random.default_rng(rng)
        self.obs_dim = obs_dim
        self.heads = list(heads)
        self.offsets = np.concatenate([[0], np.cumsum(self.heads)])
        sizes = [obs_dim, *hidden, int(sum(self.heads))]
        self.q = MLP(sizes, ["relu"] * len(hidden) + ["linear"], self.rng)
        self.q_target = self.q.copy()
        self.opt = Optimizer(self.q, lr, optimizer, grad_clip)
        self.gamma, self.tau, self.lr = gamma, tau, lr
        self.eps_start, self.eps_end, self.eps_decay_steps = eps_start, eps_end, eps_decay_steps
        self.steps = 0

    @property
    def epsilon(self) -> float:
        return linear_epsilon(self.steps, self.eps_start, self.eps_end, self.eps_decay_steps)

    def q_values(self, o) -> np.ndarray:
        return self.q.predict(o)[0]

    def greedy(self, qv) -> np.ndarray:
        return np.array([int(np.argmax(qv[a:b])) for a, b in zip(self.offsets[:-1], self.offsets[1:])])

    def select(self, o, explore: bool = True, epsilon: float | None = None):
        """Indices per head plus the Q-values they were read from."""
        qv = self.q_values(o)
        eps = self.epsilon if epsilon is None else epsilon
        if explore:
            self.steps += 1
            if self.rng.random() < eps:
                return np.array([self.rng.integers(n) for n in self.heads]), qv
        return self.greedy(qv), qv

    def _head_max(self, qv):
        return np.stack([qv[:, a:b].max(axis=1) for a, b in zip(self.offsets[:-1], self.offsets[1:])], axis=1)

    def target(self, rew, next_obs) -> np.ndarray:
        qn = self.q_target.predict(next_obs)
        return rew + self.gamma * self._head_max(qn).mean(axis=1)

    def update(self, batch) -> float:
        obs, act, rew, next_obs = batch
        y = self.target(rew, next_obs)
        out, cache = self.q.forward(obs)
        cols = self.offsets[:-1][None, :] + act.astype(int)
        rows = np.arange(len(obs))[:, None]
        chosen = out[rows, cols]
        err = chosen - y[:, None]
        B, H = err.shape
        loss = float(np.mean(err**2))
        grad = np.zeros_like(out)
        grad[rows, cols] = 2.0 * err / (B * H)
        grads, _ = self.q.backward(cache, grad)
        self.opt.step(self.q, grads)
        soft_update(self.q_target, self.q, self.tau)
        return loss

    def nets(self) -> dict:
        return {"q": self.q, "q_target": self.q_target}


class DdpgAgent:
    """Deterministic actor in [-bound, bound]^d with a Q(o, a) critic."""

    def __init__(self, obs_dim, act_dim, hidden=(256, 256), lr_actor=1e-4, lr_critic=2e-4, gamma=0.99,
                 tau_actor=1e-4, tau_critic=1e-4, noise_std=0.1, noise_decay=0.999, bound=1.0,
                 optimizer="sgd", grad_clip=None, rng=None):
        self.rng = np.random.default_rng(rng)
        self.obs_dim, self.act_dim, self.bound = obs_dim, act_dim, float(bound)
        nh = len(hidden)
        self.actor = MLP([obs_dim, *hidden, act_dim], ["relu"] * nh + ["tanh"], self.rng)
        self.critic = MLP([obs_dim + act_dim, *hidden, 1], ["relu"] * nh + ["linear"], self.rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.opt_actor = Optimizer(self.actor, lr_actor, optimizer, grad_clip)
        self.opt_critic = Optimizer(self.critic, lr_critic, optimizer, grad_clip)
        self.gamma, self.tau_actor, self.tau_critic = gamma, tau_actor, tau_critic
        self.noise_std, self.noise_decay = noise_std, noise_decay
        self.lr_actor, self.lr_critic = lr_actor, lr_critic

    def policy(self, o) -> np.ndarray:
        return self.bound * self.actor.predict(o)

    def select(self, o, explore: bool = True) -> np.ndarray:
        a = self.policy(o)[0]
        if explore and self.noise_std > 0:
            a = a + self.noise_std * 2 * self.bound * self.rng.standard_normal(self.act_dim)
            a = np.clip(a, -self.bound, self.bound)
        return a

    def end_episode(self) -> None:
        self.noise_std *= self.noise_decay

    def target(self, rew, next_obs) -> np.ndarray:
        a2 = self.bound * self.actor_target.predict(next_obs)
        q2 = self.critic_target.predict(np.hstack([next_obs, a2]))[:, 0]
        return rew + self.gamma * q2

    def critic_update(self, batch) -> float:
        obs, act, rew, next_obs = batch
        y = self.target(rew, next_obs)
        q, cache = self.critic.forward(np.hstack([obs, act]))
        err = q[:, 0] - y
        loss = float(np.mean(err**2))
        grads, _ = self.critic.backward(cache, (2.0 * err / len(err))[:, None])
        self.opt_critic.step(self.critic, grads)
        return loss

    def actor_update(self, batch) -> float:
        obs = batch[0]
        raw, a_cache = self.actor.forward(obs)
        q, c_cache = self.critic.forward(np.hstack([obs, self.bound * raw]))
        loss = -float(np.mean(q))
        _, g_in = self.critic.backward(c_cache, np.full_like(q, -1.0 / len(q)))
        g_act = g_in[:, self.obs_dim:] * self.bound
        grads, _ = self.actor.backward(a_cache, g_act)
        self.opt_actor.step(self.actor, grads)
        return loss

    def update(self, batch) -> tuple[float, float]:
        lc = self.critic_update(batch)
        la = self.actor_update(batch)
        soft_update(self.critic_target, self.critic, self.tau_critic)
        soft_update(self.actor_target, self.actor, self.tau_actor)
        return lc, la

    def nets(self) -> dict:
        return {"actor": self.actor, "critic": self.critic, "actor_target": self.actor_target,
                "critic_target": self.critic_target}
