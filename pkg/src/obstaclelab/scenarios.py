"""Named scenario library: every oracle case the test suite exercises, by name.

Boundary data defined off the circle (constant vectors, analytic maps of
(x, y)) are evaluated at the boundary node positions; data parameterized on
the circle (the latitude cap, rotations by a function of the polar angle) are
evaluated at the node's radial projection, i.e. at theta = atan2(y, x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mesh import DiskGrid, ScalarField
from .rotation import RotationField, expm_antisym


@dataclass
class Scenario:
    name: str
    kind: str  # "critical" | "obstacle" | "rotation"
    description: str
    defaults: dict


def _cap_direction(grid: DiskGrid, beta: float) -> np.ndarray:
    theta = np.arctan2(grid.y, grid.x)
    return np.stack(
        [
            np.sin(beta) * np.cos(theta),
            np.sin(beta) * np.sin(theta),
            np.cos(beta) * np.ones_like(theta),
        ],
        axis=2,
    )


def constant_boundary(grid: DiskGrid, amplitude: float, dim: int) -> np.ndarray:
    u = np.zeros((grid.n, grid.n, dim))
    u[:, :, 0] = amplitude
    return u


def harmonic_angle_boundary(grid: DiskGrid, rate: float) -> np.ndarray:
    phi = rate * grid.x
    return np.stack([np.cos(phi), np.sin(phi)], axis=2)


def harmonic_angle_exp_boundary(grid: DiskGrid, rate: float) -> np.ndarray:
    phi = rate * np.exp(grid.x) * np.sin(grid.y)
    return np.stack([np.cos(phi), np.sin(phi)], axis=2)


def cap_boundary(grid: DiskGrid, beta: float, amplitude: float) -> np.ndarray:
    return amplitude * _cap_direction(grid, beta)


def so2_boundary(grid: DiskGrid, rate: float) -> RotationField:
    return RotationField.from_angle(grid, rate * grid.x)


def so3_smooth_boundary(grid: DiskGrid, seed: int, scale: float = 0.8) -> RotationField:
    """Smooth deterministic SO(3) data: exponential of a low-order antisym field."""
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((3, 3))
    funcs = [grid.x, grid.y, grid.x * grid.y]
    comps = [
        scale * sum(c * f for c, f in zip(row, funcs)) for row in coef
    ]
    a = np.zeros((grid.n, grid.n, 3, 3))
    a[:, :, 2, 1] = comps[0]
    a[:, :, 1, 2] = -comps[0]
    a[:, :, 0, 2] = comps[1]
    a[:, :, 2, 0] = -comps[1]
    a[:, :, 1, 0] = comps[2]
    a[:, :, 0, 1] = -comps[2]
    flat = expm_antisym(a.reshape(-1, 3, 3)).reshape(grid.n, grid.n, 3, 3)
    return RotationField(grid, flat)


SCENARIOS = {
    "constant": Scenario(
        "constant", "critical", "constant exterior point amplitude*e1",
        {"amplitude": 1.5},
    ),
    "harmonic_angle": Scenario(
        "harmonic_angle", "critical",
        "unit-circle values with linear harmonic phase rate*x (exact discrete critical point)",
        {"rate": 1.5},
    ),
    "harmonic_angle_exp": Scenario(
        "harmonic_angle_exp", "critical",
        "unit-circle values with generic harmonic phase rate*exp(x)*sin(y)",
        {"rate": 1.5},
    ),
    "latitude_cap": Scenario(
        "latitude_cap", "critical", "spherical cap data at |u| = amplitude",
        {"beta": 0.4, "amplitude": 1.0},
    ),
    "cap_obstacle": Scenario(
        "cap_obstacle", "critical", "cap data lifted off the obstacle",
        {"beta": 0.4, "amplitude": 1.3},
    ),
    "cap_obstacle_deep": Scenario(
        "cap_obstacle_deep", "critical",
        "steep cap pulling lambda onto the obstacle (nonempty contact set)",
        {"beta": 0.8, "amplitude": 1.1},
    ),
    "radial_g4": Scenario(
        "radial_g4", "obstacle", "fixed weight g=4, boundary lambda=1.05",
        {"weight": 4.0, "boundary": 1.05},
    ),
    "so2_harmonic": Scenario(
        "so2_harmonic", "rotation", "SO(2) rotations by the harmonic angle rate*x",
        {"rate": 1.5},
    ),
    "so3_smooth": Scenario(
        "so3_smooth", "rotation", "smooth seeded SO(3) boundary data",
        {"scale": 0.8},
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise DomainError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}"
        ) from None


def scenario_param(scn: Scenario, params: dict, key: str) -> float:
    return params.get(key, scn.defaults[key])


def build_boundary_u(scn: Scenario, grid: DiskGrid, params: dict, dim: int) -> np.ndarray:
    if scn.name == "constant":
        return constant_boundary(grid, scenario_param(scn, params, "amplitude"), dim)
    if scn.name == "harmonic_angle":
        return harmonic_angle_boundary(grid, scenario_param(scn, params, "rate"))
    if scn.name == "harmonic_angle_exp":
        return harmonic_angle_exp_boundary(grid, scenario_param(scn, params, "rate"))
    if scn.name in ("latitude_cap", "cap_obstacle", "cap_obstacle_deep"):
        return cap_boundary(
            grid,
            scenario_param(scn, params, "beta"),
            scenario_param(scn, params, "amplitude"),
        )
    raise DomainError(f"scenario {scn.name} does not define map boundary data")


def build_obstacle_data(scn: Scenario, grid: DiskGrid, params: dict):
    if scn.name == "radial_g4":
        g = ScalarField.constant(grid, scenario_param(scn, params, "weight"))
        return g, scenario_param(scn, params, "boundary")
    raise DomainError(f"scenario {scn.name} does not define obstacle data")


def build_rotation_boundary(scn: Scenario, grid: DiskGrid, params: dict, seed: int) -> RotationField:
    if scn.name == "so2_harmonic":
        return so2_boundary(grid, scenario_param(scn, params, "rate"))
    if scn.name == "so3_smooth":
        return so3_smooth_boundary(grid, seed, scenario_param(scn, params, "scale"))
    raise DomainError(f"scenario {scn.name} does not define rotation boundary data")


def wente_pair(grid: DiskGrid, k: int, seed: int = 0):
    """Deterministic smooth (a, b) pair number k for the div-curl sweep."""
    rng = np.random.default_rng(seed + 1000 * k)
    ca = rng.uniform(-1.0, 1.0, size=4)
    cb = rng.uniform(-1.0, 1.0, size=4)
    fa = rng.uniform(1.0, 3.0, size=2)
    fb = rng.uniform(1.0, 3.0, size=2)
    x, y = grid.x, grid.y
    a = (
        ca[0] * np.sin(fa[0] * x) * np.cos(fa[1] * y)
        + ca[1] * np.cos(fa[0] * x + fa[1] * y)
        + ca[2] * x * y
        + ca[3] * (x**2 - y**2)
    )
    b = (
        cb[0] * np.cos(fb[0] * x) * np.sin(fb[1] * y)
        + cb[1] * np.sin(fb[0] * x - fb[1] * y)
        + cb[2] * (x + 0.5 * y)
        + cb[3] * x * y
    )
    return ScalarField(grid, a), ScalarField(grid, b)
