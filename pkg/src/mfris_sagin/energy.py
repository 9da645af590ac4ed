"""Harvesting, MF-RIS power draw, solar input, battery and computing energy.

Powers in W, energies in J. Amplifier noise enters in expectation only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import OrbitState, phase_times


@dataclass(frozen=True)
class EhModel:
    Z: float = 0.024
    a: float = 150.0
    q: float = 0.014

    def __post_init__(self):
        if self.Z < 0 or self.a <= 0 or self.q <= 0:
            raise ValueError("need Z >= 0, a > 0, q > 0")

    @property
    def omega(self) -> float:
        return 1.0 / (1.0 + np.exp(self.a * self.q))


def harvested_power(model: EhModel, p_rf):
    """Logistic EH curve shifted so that zero input gives zero output."""
    p_rf = np.asarray(p_rf, dtype=float)
    if np.any(p_rf < 0):
        raise ValueError("RF power must be non-negative")
    upsilon = model.Z / (1.0 + np.exp(-model.a * (p_rf - model.q)))
    om = model.omega
    out = (upsilon - model.Z * om) / (1.0 - om)
    return np.where(p_rf == 0, 0.0, np.maximum(out, 0.0))


def received_rf_power(h_eff: np.ndarray, alpha: np.ndarray, f: np.ndarray, amp_noise: float) -> np.ndarray:
    """Expected RF power routed to the harvester by each element."""
    return f * (1.0 - alpha) ** 2 * (np.abs(h_eff) ** 2 + amp_noise)


def output_power(coeffs: np.ndarray, h_eff: np.ndarray, amp_noise: float) -> float:
    """Reradiated power: signal part plus amplified noise of every element."""
    m = len(coeffs)
    return float(np.sum(np.abs(coeffs * h_eff) ** 2) + m * amp_noise * np.sum(np.abs(coeffs) ** 2))


def ris_power_consumption(f: np.ndarray, levels, p_pin: float, p_conversion: float, xi: float, p_out: float) -> float:
    for lv in levels:
        if lv < 1 or int(lv) & (int(lv) - 1):
            raise ValueError(f"quantization level {lv} is not a power of two")
    bits = 0.5 * sum(np.log2(lv) for lv in levels)
    return float(bits * np.sum(f) * p_pin + p_conversion + xi * p_out)


def _trapezoid(y, x):
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2.0)


def _solar_integrand(theta, orbit: OrbitState, peak: float):
    lit = np.abs(np.pi - np.mod(np.pi - theta, 2 * np.pi)) >= orbit.theta_0
    return lit * peak * np.sqrt(np.clip(1.0 - np.cos(orbit.phi) ** 2 * np.cos(theta) ** 2, 0.0, None))


def solar_energy(orbit: OrbitState | None, dt: float, eta: float, psi: float, area: float,
                 n_sub: int = 64) -> float:
    """Solar energy collected over one slot. ``orbit=None`` means a stationary node."""
    if dt <= 0:
        raise ValueError("slot length must be positive")
    peak = eta * psi * area
    if orbit is None:
        return peak * dt
    t = np.linspace(0.0, dt, max(n_sub, 32) + 1)
    return _trapezoid(_solar_integrand(orbit.theta_rot + orbit.omega_dot * t, orbit, peak), t)


def solar_input_power(orbit: OrbitState | None, eta: float, psi: float, area: float, n_sub: int = 64) -> float:
    """Average charging power over the rest of the current sunlit arc.

    Stationary nodes charge at the constant panel rating. At the instant of
    shadow entry (no arc left) the instantaneous value is used.
    """
    peak = eta * psi * area
    if orbit is None:
        return peak
    t_sun, _ = phase_times(orbit)
    if t_sun <= 0:
        return float(_solar_integrand(np.array([orbit.theta_rot]), orbit, peak)[0])
    t = np.linspace(0.0, t_sun, max(n_sub, 32) + 1)
    return _trapezoid(_solar_integrand(orbit.theta_rot + orbit.omega_dot * t, orbit, peak), t) / t_sun


@dataclass
class BatteryStep:
    energy: float
    clamp_loss: float  # surplus discarded at full capacity
    deficit: float     # shortfall below empty, reported as a positive amount
    net_flow: float


def battery_step(e_prev: float, capacity: float, net_power: float, duration: float) -> BatteryStep:
    """Advance stored energy by ``net_power * duration`` and clamp to [0, capacity].

    Bookkeeping: (energy - e_prev) + clamp_loss - deficit == net_flow.
    """
    if not 0.0 <= e_prev <= capacity:
        raise ValueError("previous battery level outside [0, capacity]")
    net = net_power * duration
    raw = e_prev + net
    if raw > capacity:
        return BatteryStep(capacity, raw - capacity, 0.0, net)
    if raw < 0.0:
        return BatteryStep(0.0, 0.0, -raw, net)
    return BatteryStep(raw, 0.0, 0.0, net)


def computing_energy(t_cp, U, tau: float):
    return tau * np.asarray(t_cp) * np.asarray(U, dtype=float) ** 3


def consumed_energy(p_ris, p_tx, p_circuit, p_harvest, duration):
    return (np.asarray(p_ris) + p_tx + p_circuit - p_harvest) * duration


def total_energy(p_ris, p_tx, p_circuit, p_harvest, e_cp, duration):
    return consumed_energy(p_ris, p_tx, p_circuit, p_harvest, duration) + e_cp


@dataclass
class EnergyLedger:
    """Per-node energy account of one slot (arrays of length n_nodes)."""
    e_solar: np.ndarray
    p_harvest: np.ndarray
    p_ris: np.ndarray
    p_tx: np.ndarray
    p_circuit: np.ndarray
    p_out: np.ndarray
    e_cp: np.ndarray
    battery: np.ndarray
    deficit: np.ndarray
    clamp_loss: np.ndarray
    duration: float
    extra: dict = field(default_factory=dict)

    @property
    def e_tot(self) -> np.ndarray:
        return total_energy(self.p_ris, self.p_tx, self.p_circuit, self.p_harvest, self.e_cp, self.duration)
