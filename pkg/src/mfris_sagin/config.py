"""Experiment configuration schema.

One YAML document with a section per subsystem. Every section forbids unknown
keys so typos fail before any slot is simulated. Defaults mirror the
simulation table of the reference scenario; values it leaves open are chosen
here and documented next to the field.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=False)


class TopologyConfig(_Section):
    n_space: int = Field(2, ge=0)
    n_air: int = Field(2, ge=0)
    n_ground: int = Field(2, ge=0)
    n_users: int = Field(18, ge=1)
    coverage_side: float = Field(2000.0, gt=0, description="user square side [m]")
    earth_radius: float = 6378e3
    leo_altitude: float = 1000e3
    haps_altitude: float = 50e3
    bs_height: float = 25.0
    user_height: float = 1.5
    haps_grid: int = Field(8, ge=1)
    sun_angle: float = Field(0.3, ge=0.0, le=1.5707963267948966)
    orbit_rate: float = Field(7.29e-5, gt=0)
    slot_seconds: float = Field(10.0, gt=0)
    surface_offset: float = Field(1.0, gt=0, description="node to its own surface [m]")

    @model_validator(mode="after")
    def _check(self):
        if self.n_space + self.n_air + self.n_ground < 1:
            raise ValueError("topology needs at least one node")
        if not self.haps_altitude < self.leo_altitude:
            raise ValueError("haps_altitude must be below leo_altitude")
        return self


class ChannelConfig(_Section):
    n_antennas: int = Field(16, ge=1)
    m_h: int = Field(8, ge=1)
    m_v: int = Field(4, ge=1)
    h0_db: float = -20.0
    k0: float = Field(2.2, gt=0)
    beta0: float = Field(5.0, ge=0)
    frequency: float = Field(2.49e9, gt=0)
    spacing_wavelengths: float = Field(0.5, gt=0)
    noise_dbm: float = -80.0
    ris_noise_dbm: float = -80.0
    beta_max: float = Field(100.0, ge=0)

    @property
    def n_elements(self) -> int:
        return self.m_h * self.m_v


class EnergyConfig(_Section):
    eh_max: float = Field(0.024, ge=0)
    eh_a: float = Field(150.0, gt=0)
    eh_q: float = Field(0.014, gt=0)
    levels: tuple[int, int, int] = (4, 1024, 256)
    p_pin: float = 0.33e-3
    p_conversion: float = 10.0
    xi: float = 1.1
    p_circuit: float = 90.0
    battery_capacity: float = 9e4
    eta: float = 0.19
    light_intensity: float = 500.0
    panel_area: float = 4.0
    tau: float = 1e-28
    data_bits: float = 64 * 1024 * 8
    cycles_per_bit: float = 1.0
    bandwidth: float = 10e6
    energy_floor: float = Field(1e-3, gt=0)
    solar_subintervals: int = Field(64, ge=32)

    @field_validator("levels")
    @classmethod
    def _pow2(cls, v):
        for lv in v:
            if lv < 1 or lv & (lv - 1):
                raise ValueError(f"quantization level {lv} is not a power of two")
        return v


class EnvironmentConfig(_Section):
    r_min: float = 0.5
    p_max_space: float = 20.0
    p_max_air: float = 10.0
    p_max_ground: float = 5.0
    t_threshold: float = 0.05
    u_max: float = 1e9
    u_levels: int = Field(8, ge=1)
    penalty_weights: tuple[float, float, float, float, float] = (1.0, 1.0, 1.0, 1.0, 1.0)
    episode_length: int = Field(200, ge=1)

    @field_validator("penalty_weights")
    @classmethod
    def _nonneg(cls, v):
        if any(w < 0 for w in v):
            raise ValueError("penalty weights must be non-negative")
        return v


class AgentConfig(_Section):
    hidden: tuple[int, ...] = (256, 256)
    lr_actor: float = 1e-4
    lr_critic: float = 2e-4
    lr_dqn: float = 1e-3
    gamma: float = Field(0.99, ge=0, le=1)
    tau_actor: float = 1e-4
    tau_critic: float = 1e-4
    tau_dqn: float = 1e-2
    buffer_size: int = Field(100_000, ge=1)
    batch_size: int = Field(64, ge=1)
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decay_steps: int = 10_000
    noise_std: float = Field(0.1, ge=0, description="fraction of each action range")
    noise_decay: float = Field(0.999, gt=0, le=1)
    optimizer: Literal["sgd", "adam"] = "sgd"
    grad_clip: Optional[float] = None
    quant_levels: int = Field(3, ge=2, description="levels per continuous dim for DQN-only")
    reward_transform: Literal["symlog", "none"] = "symlog"


class VaeConfig(_Section):
    ratio_state: float = Field(0.5, gt=0, le=1)
    ratio_continuous: float = Field(0.5, gt=0, le=1)
    ratio_discrete: float = Field(0.5, gt=0, le=1)
    hidden: tuple[int, ...] = (256,)
    epochs: int = Field(60, ge=1)
    batch_size: int = 256
    lr: float = 1e-3
    kl_weight: float = 1e-4
    n_samples: int = Field(100_000, ge=10)
    holdout: float = Field(0.1, gt=0, lt=1)
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    input_skip: float = Field(2.0, ge=0, description="one-hot added to discrete encoder logits")
    action_prior: Literal["uniform", "structured"] = "structured"


class MethodConfig(_Section):
    kind: Literal[
        "chimera", "central_dqn", "central_ddpg", "maddpg", "hybrid_single", "ga", "zf",
        "mmse", "no_ris", "fixed_alpha", "passive_beta", "elements_fraction",
        "layer_subset", "fixed_haps",
    ] = "chimera"
    twin: bool = True
    compress: bool = True
    alpha: Optional[float] = Field(None, ge=0, le=1)
    fraction: Optional[float] = Field(None, ge=0, le=1)
    layers: Optional[tuple[str, ...]] = None
    population: int = Field(20, ge=1)
    generations: int = Field(10, ge=1)
    mutation: float = Field(0.05, ge=0, le=1)
    elite: float = Field(0.1, gt=0, le=1)

    @model_validator(mode="after")
    def _kind_params(self):
        if self.kind == "fixed_alpha" and self.alpha is None:
            raise ValueError("fixed_alpha needs method.alpha")
        if self.kind == "elements_fraction" and self.fraction is None:
            raise ValueError("elements_fraction needs method.fraction")
        if self.kind == "layer_subset":
            if not self.layers:
                raise ValueError("layer_subset needs method.layers")
            bad = set(self.layers) - {"space", "air", "ground"}
            if bad:
                raise ValueError(f"unknown layers {sorted(bad)}")
        return self


class SweepConfig(_Section):
    axis: str
    values: list


class ExperimentConfig(_Section):
    topology: TopologyConfig = TopologyConfig()
    channel: ChannelConfig = ChannelConfig()
    energy: EnergyConfig = EnergyConfig()
    environment: EnvironmentConfig = EnvironmentConfig()
    agent: AgentConfig = AgentConfig()
    vae: VaeConfig = VaeConfig()
    method: MethodConfig = MethodConfig()
    sweep: Optional[SweepConfig] = None
    seeds: list[int] = [0]
    episodes: int = Field(300, ge=1)
    final_window: int = Field(100, ge=1)
    checkpoint_every: int = Field(0, ge=0, description="episodes between checkpoints; 0 = end only")
    output_dir: str = "runs/default"

    @model_validator(mode="after")
    def _cross(self):
        if self.sweep is not None:
            try:
                self.with_override(self.sweep.axis, self.sweep.values[0])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"bad sweep axis {self.sweep.axis!r}: {exc}") from exc
        if not self.seeds:
            raise ValueError("seeds list is empty")
        return self

    def with_override(self, dotted: str, value) -> "ExperimentConfig":
        """Copy with one dotted key replaced, re-validated."""
        data = self.model_dump(mode="json")
        if dotted == "channel.elements":
            m = int(value)
            m_v = 1
            while m_v * 2 * m_v * 2 <= m and m % (m_v * 2) == 0:
                m_v *= 2
            data["channel"]["m_h"], data["channel"]["m_v"] = m // m_v, m_v
            data["sweep"] = None
            return ExperimentConfig.model_validate(data)
        parts = dotted.split(".")
        cur = data
        for p in parts[:-1]:
            if not isinstance(cur, dict) or p not in cur:
                raise KeyError(dotted)
            cur = cur[p]
        if not isinstance(cur, dict) or parts[-1] not in cur:
            raise KeyError(dotted)
        cur[parts[-1]] = value
        data["sweep"] = None
        return ExperimentConfig.model_validate(data)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return ExperimentConfig.model_validate(data)


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True))


def desk_config(**overrides) -> ExperimentConfig:
    """Small scenario used by the acceptance suite: 3 nodes, 4 users, N=4, M=8."""
    data = {
        "topology": {"n_space": 1, "n_air": 1, "n_ground": 1, "n_users": 4, "haps_grid": 4},
        "channel": {"n_antennas": 4, "m_h": 4, "m_v": 2},
        "environment": {"episode_length": 32},
        "agent": {"hidden": [64, 64], "buffer_size": 20000},
        "vae": {"n_samples": 20000},
    }
    for dotted, value in overrides.items():
        parts = dotted.split("__")
        cur = data
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = value
    return ExperimentConfig.model_validate(data)
