"""Multi-agent environment: one agent per network node, penalized-EE reward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import ActionClamp, ActionCodec, HybridAction, project_joint
from .channel import ChannelParams, combined_channel, effective_eh_channel, generate_channels, incident_fields
from .energy import (EhModel, battery_step, computing_energy, harvested_power, output_power,
                     received_rf_power, ris_power_consumption, solar_input_power, total_energy)
from .link import link_report
from .topology import advance_orbit, build_topology, leo_position, make_orbit

N_PENALTIES = 5


def dbm_to_watt(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


@dataclass
class SlotResult:
    rewards: np.ndarray     # (n,)
    ee: np.ndarray          # (n,) sum rate over max(E_tot, eps)
    rates: np.ndarray       # (n, K)
    penalties: np.ndarray   # (n, 5) signed, before the hinge
    e_tot: np.ndarray
    p_harvest: np.ndarray
    p_ris: np.ndarray
    p_out: np.ndarray
    p_tx: np.ndarray
    e_cp: np.ndarray
    e_solar: np.ndarray
    battery: np.ndarray
    clamp_loss: np.ndarray
    deficit: np.ndarray
    net_flow: np.ndarray
    t_tot: np.ndarray
    delta: np.ndarray


def penalty_vector(rates, r_min, p_ris, p_harvest, p_tx, p_max, deficit, t_tot, t_th) -> np.ndarray:
    """Signed constraint violations C_1..C_5 for every node, shape (n, 5)."""
    c1 = np.sum(r_min - rates, axis=1)
    c2 = p_ris - p_harvest
    c3 = p_tx - p_max
    c4 = deficit
    c5 = t_tot - t_th
    return np.column_stack([c1, c2, c3, c4, c5])


def penalized_reward(sum_rate, e_tot, penalties, weights, eps):
    ee = sum_rate / np.maximum(e_tot, eps)
    return ee - np.maximum(penalties, 0.0) @ np.asarray(weights, dtype=float), ee


def encode_channel(g_node: np.ndarray, scale: float) -> np.ndarray:
    """Log-compressed complex gains, real/imag interleaved."""
    mag = np.abs(g_node).reshape(-1)
    z = g_node.reshape(-1)
    unit = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0.0)
    v = unit * np.log1p(mag * scale)
    out = np.empty(2 * len(z))
    out[0::2] = v.real
    out[1::2] = v.imag
    return out


class SaginEnv:
    """Slot-based SAGIN simulator.

    reset(seed) -> list of observations; step(actions) commits one slot.
    probe_reward evaluates a candidate action without touching state.
    """

    def __init__(self, cfg, clamp: ActionClamp | None = None):
        self.cfg = cfg
        self.tcfg, self.ccfg, self.ecfg, self.vcfg = cfg.topology, cfg.channel, cfg.energy, cfg.environment
        self.params = ChannelParams.from_config(cfg.channel)
        self.eh = EhModel(cfg.energy.eh_max, cfg.energy.eh_a, cfg.energy.eh_q)
        self.noise = dbm_to_watt(cfg.channel.noise_dbm)
        self.ris_noise = dbm_to_watt(cfg.channel.ris_noise_dbm)
        self.layers = (["space"] * self.tcfg.n_space + ["air"] * self.tcfg.n_air
                       + ["ground"] * self.tcfg.n_ground)
        self.n_agents = len(self.layers)
        pmax = {"space": self.vcfg.p_max_space, "air": self.vcfg.p_max_air, "ground": self.vcfg.p_max_ground}
        self.p_max = np.array([pmax[c] for c in self.layers])
        cells = self.tcfg.haps_grid ** 2
        self.codecs = [ActionCodec(self.tcfg.n_users, self.ccfg.n_antennas, self.ccfg.n_elements,
                                   self.vcfg.u_levels, self.p_max[i], self.ccfg.beta_max,
                                   cells if c == "air" else 0)
                       for i, c in enumerate(self.layers)]
        self.clamp = clamp or ActionClamp()
        self.obs_scale = np.sqrt(self.p_max / self.noise)
        self.seed = None
        self.t = 0

    # ------------------------------------------------------------------ sizes
    @property
    def obs_dim(self) -> int:
        return 2 * self.ccfg.n_antennas * self.tcfg.n_users + 2

    # ------------------------------------------------------------------ state
    def reset(self, seed: int):
        self.seed = int(seed)
        ss = np.random.SeedSequence(self.seed)
        topo_rng, orbit_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        theta0 = orbit_rng.uniform(-np.pi, np.pi)
        self.scene_angle = theta0
        self.orbits = [make_orbit(theta0 - 0.01 * j, self.tcfg.sun_angle, self.tcfg.orbit_rate,
                                  self.tcfg.leo_altitude, self.tcfg.earth_radius)
                       for j in range(self.tcfg.n_space)]
        leo = [self._leo_xyz(j) for j in range(self.tcfg.n_space)]
        self.topo = build_topology(self.tcfg, topo_rng, leo_positions=np.array(leo) if leo else None)
        self.haps_idx = self.topo.indices("air")
        self.initial_cells = {}
        for i in self.haps_idx:
            d = np.linalg.norm(self.topo.haps_grid - self.topo.nodes[i], axis=1)
            self.initial_cells[i] = int(np.argmin(d))
        if self.clamp.haps_cells is not None:
            self.clamp.haps_cells.update(self.initial_cells)
        self.battery = np.full(self.n_agents, self.ecfg.battery_capacity)
        self.t = 0
        start = [c.zero_action() for c in self.codecs]
        for i in self.haps_idx:
            start[i].haps_cell = self.initial_cells[i]
        self.committed = self.prepare(start)
        self.channels = self._draw_channels()
        return self.observations()

    def _leo_xyz(self, j):
        return leo_position(self.orbits[j], self.scene_angle, self.tcfg.leo_altitude, self.tcfg.earth_radius,
                            offset=(0.0, 20e3 * j))

    def _draw_channels(self):
        rng = np.random.default_rng([self.seed, 7, self.t])
        return generate_channels(self.params, self.topo, rng)

    def sunlit(self) -> np.ndarray:
        out = np.ones(self.n_agents)
        for j in range(self.tcfg.n_space):
            out[j] = float(self.orbits[j].in_sunlight)
        return out

    def observations(self) -> list[np.ndarray]:
        coeffs = np.stack([a.coefficients() for a in self.committed])
        g = combined_channel(self.channels, coeffs)
        frac = self.battery / self.ecfg.battery_capacity
        sun = self.sunlit()
        return [np.concatenate([encode_channel(g[i], self.obs_scale[i]), [frac[i], sun[i]]])
                for i in range(self.n_agents)]

    def global_state(self) -> np.ndarray:
        return np.concatenate(self.observations())

    # ------------------------------------------------------------- evaluation
    def prepare(self, actions: list[HybridAction]) -> list[HybridAction]:
        """Project and apply fixed-configuration clamps."""
        return self.clamp.apply(project_joint(actions, self.codecs))

    def evaluate(self, actions: list[HybridAction]) -> SlotResult:
        """Outcome of the current slot under a feasible joint action. Pure."""
        e, v = self.ecfg, self.vcfg
        coeffs = np.stack([a.coefficients() for a in actions])
        W = np.stack([a.w for a in actions])
        delta = np.stack([a.claims for a in actions])
        U = np.array([c.compute_capability(a.u_level, v.u_max) for a, c in zip(actions, self.codecs)])
        fields = incident_fields(self.channels, coeffs)
        g = combined_channel(self.channels, coeffs, fields)
        dist = self.topo.user_distances()
        rep = link_report(g, W, delta, self.noise, e.data_bits, U, e.bandwidth, dist, e.cycles_per_bit)
        h_eff = effective_eh_channel(self.channels, coeffs, W, delta, fields)
        alpha = np.stack([a.alpha for a in actions])
        f = np.stack([a.f for a in actions])
        p_h = harvested_power(self.eh, received_rf_power(h_eff, alpha, f, self.ris_noise)).sum(axis=1)
        p_out = np.array([output_power(coeffs[i], h_eff[i], self.ris_noise) for i in range(self.n_agents)])
        p_ris = np.array([ris_power_consumption(f[i], e.levels, e.p_pin, e.p_conversion, e.xi, p_out[i])
                          for i in range(self.n_agents)])
        p_tx = np.sum(np.abs(W) ** 2, axis=(1, 2))
        e_cp = computing_energy(rep.t_cp, U, e.tau)
        T = self.tcfg.slot_seconds
        sun = self.sunlit()
        p_in = np.array([solar_input_power(self.orbits[i] if i < self.tcfg.n_space else None,
                                           e.eta, e.light_intensity, e.panel_area, e.solar_subintervals)
                         for i in range(self.n_agents)])
        net = p_in * sun + p_h - p_ris - (p_tx + e.p_circuit)
        steps = [battery_step(self.battery[i], e.battery_capacity, net[i], T) for i in range(self.n_agents)]
        e_tot = total_energy(p_ris, p_tx, e.p_circuit, p_h, e_cp, T)
        C = penalty_vector(rep.rate, v.r_min, p_ris, p_h, p_tx, self.p_max,
                           np.array([s.deficit for s in steps]), rep.t_tot, v.t_threshold)
        sum_rate = rep.rate.sum(axis=1)
        rewards, ee = penalized_reward(sum_rate, e_tot, C, v.penalty_weights, e.energy_floor)
        return SlotResult(rewards, ee, rep.rate, C, e_tot, p_h, p_ris, p_out, p_tx, e_cp, p_in * sun * T,
                          np.array([s.energy for s in steps]), np.array([s.clamp_loss for s in steps]),
                          np.array([s.deficit for s in steps]), np.array([s.net_flow for s in steps]),
                          rep.t_tot, delta)

    def probe_reward(self, agent: int, candidate: HybridAction, frozen: list | None = None) -> float:
        """Reward ``agent`` would get if it played ``candidate`` against ``frozen``.

        ``frozen`` defaults to the previous committed joint action.
        """
        joint = list(self.committed if frozen is None else frozen)
        joint[agent] = candidate
        return float(self.evaluate(self.prepare(joint)).rewards[agent])

    # ------------------------------------------------------------------- step
    def step(self, actions: list[HybridAction]):
        joint = self.prepare(actions)
        res = self.evaluate(joint)
        self.battery = res.battery.copy()
        self.committed = joint
        for i in self.haps_idx:
            self.topo.move_node(i, self.topo.haps_grid[joint[i].haps_cell].copy())
        dt = self.tcfg.slot_seconds
        self.orbits = [advance_orbit(o, dt) for o in self.orbits]
        for j in range(self.tcfg.n_space):
            self.topo.move_node(j, self._leo_xyz(j))
        self.t += 1
        self.channels = self._draw_channels()
        done = self.t >= self.vcfg.episode_length
        return self.observations(), res.rewards.copy(), res, done


def make_clamp(method, layers, n_elements: int, seed: int) -> ActionClamp:
    """Fixed-configuration override for an ablation kind (identity for learners)."""
    kind = method.kind
    if kind == "no_ris":
        return ActionClamp(no_ris=True)
    if kind == "fixed_alpha":
        return ActionClamp(alpha=method.alpha)
    if kind == "passive_beta":
        return ActionClamp(beta_cap=1.0, alpha=1.0 if method.alpha is None else method.alpha)
    if kind == "elements_fraction":
        rng = np.random.default_rng([seed, 11])
        k = int(np.floor(method.fraction * n_elements))
        masks = []
        for _ in layers:
            m = np.zeros(n_elements)
            m[rng.choice(n_elements, size=k, replace=False)] = 1.0
            masks.append(m)
        return ActionClamp(element_masks=masks)
    if kind == "fixed_haps":
        return ActionClamp(haps_cells={})
    return ActionClamp()
