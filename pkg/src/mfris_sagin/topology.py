"""Node and user geometry, circular LEO motion and eclipse geometry."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

LAYERS = ("space", "air", "ground")
# Higher rank = higher layer. Signals only bounce towards the same or lower rank.
LAYER_RANK = {"ground": 0, "air": 1, "space": 2}


def distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def wrap_angle(theta):
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def shadow_half_angle(phi: float, h: float, earth_radius: float) -> float:
    """Half-angle of the eclipsed arc of a circular orbit.

    ``phi`` is the angle between the orbital plane and the sun direction,
    ``h`` the orbit altitude. The angle is measured from the midpoint of
    the shadowed arc, so a satellite is sunlit iff ``|theta_rot| >= result``.
    Uses a cylindrical Earth shadow.
    """
    r = earth_radius + h
    critical = np.arcsin(earth_radius / r)
    if phi > critical:
        return 0.0
    c = np.cos(phi)
    if c <= 0.0:
        return 0.0
    num = earth_radius**2 * c**2 - (2.0 * earth_radius * h + h**2) * np.sin(phi) ** 2
    ratio = np.sqrt(max(num, 0.0)) / (r * c)
    return float(np.arcsin(min(ratio, 1.0)))


@dataclass(frozen=True)
class OrbitState:
    theta_rot: float  # from the midpoint of the shadowed arc, in (-pi, pi]
    phi: float
    omega_dot: float
    theta_0: float

    @property
    def in_sunlight(self) -> bool:
        return abs(self.theta_rot) >= self.theta_0


def make_orbit(theta_rot: float, phi: float, omega_dot: float, h: float, earth_radius: float) -> OrbitState:
    return OrbitState(float(wrap_angle(theta_rot)), phi, omega_dot, shadow_half_angle(phi, h, earth_radius))


def phase_times(orbit: OrbitState, theta_0: float | None = None) -> tuple[float, float]:
    """Remaining time until the next shadow entry and until the next shadow exit.

    Both are clamped at zero, which makes them continuous inside each of the
    two angle branches [0, pi) and [-pi, 0).
    """
    th0 = orbit.theta_0 if theta_0 is None else theta_0
    th = orbit.theta_rot
    if th >= 0.0 and th < np.pi:
        t_sun = (2.0 * np.pi - th0 - th) / orbit.omega_dot
    else:
        t_sun = (-th0 - th) / orbit.omega_dot
    t_shd = (th0 - th) / orbit.omega_dot
    return max(t_sun, 0.0), max(t_shd, 0.0)


def advance_orbit(orbit: OrbitState, dt: float) -> OrbitState:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return replace(orbit, theta_rot=float(wrap_angle(orbit.theta_rot + orbit.omega_dot * dt)))


def leo_position(orbit: OrbitState, scene_angle: float, h: float, earth_radius: float, offset=(0.0, 0.0)) -> np.ndarray:
    """Scene coordinates of the satellite.

    The scene sits at orbit angle ``scene_angle``; the ground track is laid
    along +x, so the satellite is overhead when ``theta_rot == scene_angle``.
    """
    r = earth_radius + h
    d = wrap_angle(orbit.theta_rot - scene_angle)
    return np.array([offset[0] + r * np.sin(d), offset[1], r * np.cos(d) - earth_radius])


def haps_grid(x_min, x_max, g: int, altitude: float) -> np.ndarray:
    """Cell centres of a g x g lattice over the deployment box."""
    x_min = np.asarray(x_min, dtype=float)
    x_max = np.asarray(x_max, dtype=float)
    step = (x_max - x_min) / g
    xs = x_min[0] + step[0] * (np.arange(g) + 0.5)
    ys = x_min[1] + step[1] * (np.arange(g) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(g * g, altitude)])


@dataclass
class Topology:
    layers: list          # layer name per node, ordered space -> air -> ground
    nodes: np.ndarray     # (n_nodes, 3)
    surfaces: np.ndarray  # (n_nodes, 3) one surface mounted on each node
    users: np.ndarray     # (n_users, 3)
    haps_grid: np.ndarray
    earth_radius: float
    leo_altitude: float
    haps_altitude: float
    x_min: np.ndarray
    x_max: np.ndarray
    surface_offset: float

    @property
    def n_nodes(self) -> int:
        return len(self.layers)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def ranks(self) -> np.ndarray:
        return np.array([LAYER_RANK[c] for c in self.layers])

    def indices(self, layer: str) -> list[int]:
        return [i for i, c in enumerate(self.layers) if c == layer]

    def move_node(self, i: int, position) -> None:
        self.nodes[i] = position
        self.surfaces[i] = np.asarray(position, dtype=float) + self._mount(self.layers[i])

    def _mount(self, layer: str) -> np.ndarray:
        # Surfaces hang below airborne nodes and beside ground masts.
        if layer == "ground":
            return np.array([self.surface_offset, 0.0, 0.0])
        return np.array([0.0, 0.0, -self.surface_offset])

    def user_distances(self) -> np.ndarray:
        return np.linalg.norm(self.nodes[:, None, :] - self.users[None, :, :], axis=-1)


def build_topology(cfg, rng: np.random.Generator, leo_positions=None, haps_cells=None) -> Topology:
    """Place nodes and users for one episode.

    ``cfg`` is a :class:`~mfris_sagin.config.TopologyConfig`. Users are
    uniform over the coverage square centred at the origin; ground stations
    are spread on a ring of radius side/4 (or the origin when alone); HAPS
    start at the supplied grid cells (default: cells nearest the centre).
    """
    half = cfg.coverage_side / 2.0
    x_min = np.array([-half, -half])
    x_max = np.array([half, half])
    grid = haps_grid(x_min, x_max, cfg.haps_grid, cfg.haps_altitude)
    layers = ["space"] * cfg.n_space + ["air"] * cfg.n_air + ["ground"] * cfg.n_ground
    nodes = np.zeros((len(layers), 3))
    if leo_positions is not None:
        nodes[: cfg.n_space] = leo_positions
    if haps_cells is None:
        centre = np.argsort(np.linalg.norm(grid[:, :2], axis=1), kind="stable")
        haps_cells = [int(centre[i % len(centre)]) for i in range(cfg.n_air)]
    for j, cell in enumerate(haps_cells):
        nodes[cfg.n_space + j] = grid[cell]
    for j in range(cfg.n_ground):
        if cfg.n_ground == 1:
            xy = (0.0, 0.0)
        else:
            ang = 2.0 * np.pi * j / cfg.n_ground
            xy = (half / 2.0 * np.cos(ang), half / 2.0 * np.sin(ang))
        nodes[cfg.n_space + cfg.n_air + j] = [xy[0], xy[1], cfg.bs_height]
    users = np.column_stack([
        rng.uniform(-half, half, cfg.n_users),
        rng.uniform(-half, half, cfg.n_users),
        np.full(cfg.n_users, cfg.user_height),
    ])
    topo = Topology(layers, nodes, np.zeros_like(nodes), users, grid, cfg.earth_radius,
                    cfg.leo_altitude, cfg.haps_altitude, x_min, x_max, cfg.surface_offset)
    for i in range(len(layers)):
        topo.move_node(i, nodes[i].copy())
    return topo
