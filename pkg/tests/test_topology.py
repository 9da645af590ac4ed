import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfris_sagin.config import TopologyConfig
from mfris_sagin.topology import (advance_orbit, build_topology, distance, haps_grid, leo_position, make_orbit,
                                  phase_times, shadow_half_angle, wrap_angle)

from oracles import shadow_half_angle_by_rays

RE = 6378e3
OMEGA = 7.29e-5


def test_shadow_zero_above_critical_angle():
    assert shadow_half_angle(np.deg2rad(80), 1000e3, RE) == 0.0
    crit = np.arcsin(RE / (RE + 1000e3))
    assert np.isclose(np.rad2deg(crit), 59.82, atol=0.01)
    assert shadow_half_angle(crit + 1e-9, 1000e3, RE) == 0.0


def test_shadow_grazing_orbit_is_half():
    assert np.isclose(shadow_half_angle(0.0, 1e-3, RE), np.pi / 2, atol=1e-4)


def test_shadow_matches_ray_oracle_at_30deg():
    phi = np.deg2rad(30)
    assert abs(shadow_half_angle(phi, 1000e3, RE) - shadow_half_angle_by_rays(phi, 1000e3, RE)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.2), st.floats(1e5, 3e6))
def test_shadow_monotone_in_phi(phi, h):
    a = shadow_half_angle(phi, h, RE)
    b = shadow_half_angle(min(phi + 0.01, 1.5), h, RE)
    assert b <= a + 1e-12


def test_phase_times_examples():
    th0 = 0.5
    orb = make_orbit(th0, 0.3, OMEGA, 1000e3, RE)
    t_sun, _ = phase_times(orb, th0)
    assert np.isclose(t_sun, (2 * np.pi - 2 * th0) / OMEGA)
    orb = make_orbit(-th0, 0.3, OMEGA, 1000e3, RE)
    assert phase_times(orb, th0)[0] == 0.0
    orb = make_orbit(0.2, 0.3, OMEGA, 1000e3, RE)
    assert np.isclose(phase_times(orb, 0.5)[1], 0.3 / OMEGA)
    assert abs(phase_times(orb, 0.5)[1] - 4115) < 1


@settings(max_examples=100, deadline=None)
@given(st.floats(-np.pi + 1e-9, np.pi), st.floats(0.0, 1.5))
def test_phase_times_nonnegative(theta, th0):
    orb = make_orbit(theta, 0.3, OMEGA, 1000e3, RE)
    t_sun, t_shd = phase_times(orb, th0)
    assert t_sun >= 0 and t_shd >= 0


def test_phase_times_continuous_within_branch():
    th = np.linspace(0.0, np.pi - 1e-3, 2000)
    v = np.array([phase_times(make_orbit(t, 0.3, OMEGA, 1000e3, RE), 0.4) for t in th])
    assert np.max(np.abs(np.diff(v, axis=0))) < 2 * (th[1] - th[0]) / OMEGA


def test_advance_orbit_cases():
    orb = make_orbit(0.3, 0.2, OMEGA, 1000e3, RE)
    assert advance_orbit(orb, 0.0) == orb
    full = advance_orbit(orb, 2 * np.pi / OMEGA)
    assert np.isclose(full.theta_rot, orb.theta_rot, atol=1e-9)
    near = make_orbit(np.pi - 1e-6, 0.2, OMEGA, 1000e3, RE)
    moved = advance_orbit(near, 1.0)
    expected = np.mod(np.pi - 1e-6 + OMEGA + np.pi, 2 * np.pi) - np.pi
    assert -np.pi < moved.theta_rot <= np.pi
    assert np.isclose(moved.theta_rot, expected)
    with pytest.raises(ValueError):
        advance_orbit(orb, -1.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(0, 1e5), st.floats(0, 1e5))
def test_advance_orbit_composes(theta, a, b):
    orb = make_orbit(theta, 0.2, OMEGA, 1000e3, RE)
    x = advance_orbit(advance_orbit(orb, a), b).theta_rot
    y = advance_orbit(orb, a + b).theta_rot
    assert abs(wrap_angle(x - y)) < 1e-9


def test_distance_examples():
    assert distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert distance([0, 0, 0], [3, 4, 0]) == 5.0
    orb = make_orbit(0.7, 0.2, OMEGA, 1000e3, RE)
    p = leo_position(orb, 0.7, 1000e3, RE)
    assert np.isclose(distance([0, 0, 0], p), 1e6)


def test_wrap_angle_range():
    x = np.linspace(-20, 20, 1001)
    w = wrap_angle(x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert np.allclose(np.cos(w), np.cos(x)) and np.allclose(np.sin(w), np.sin(x))


def test_haps_grid_layout():
    g = haps_grid([-1000, -1000], [1000, 1000], 4, 50e3)
    assert g.shape == (16, 3)
    assert np.allclose(g[:, 2], 50e3)
    assert np.isclose(g[:, 0].min(), -750) and np.isclose(g[:, 0].max(), 750)


def test_build_topology_layout(rng):
    cfg = TopologyConfig(n_space=1, n_air=1, n_ground=3, n_users=7)
    t = build_topology(cfg, rng, leo_positions=np.array([[0, 0, 1e6]]))
    assert t.layers == ["space", "air", "ground", "ground", "ground"]
    assert t.users.shape == (7, 3)
    assert np.all(np.abs(t.users[:, :2]) <= cfg.coverage_side / 2)
    ring = np.linalg.norm(t.nodes[2:, :2], axis=1)
    assert np.allclose(ring, cfg.coverage_side / 4)
    assert np.allclose(np.linalg.norm(t.surfaces - t.nodes, axis=1), cfg.surface_offset)
    assert t.user_distances().shape == (5, 7)
