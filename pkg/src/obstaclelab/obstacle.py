"""Scalar obstacle subproblem: min of the quadratic energy over lambda >= 1.

For a fixed nonnegative weight g the energy

    J(lambda) = 0.5 * sum_edges (lambda_a - lambda_b)^2
              + 0.5 * h^2 * sum_nodes g lambda^2

is minimized subject to lambda >= 1 at interior nodes and Dirichlet data on
the boundary ring. The node-wise gradient of J is h^2 (-lap lambda + g lambda)
with the compact 5-point Laplacian, so the discrete KKT conditions read

    lambda >= 1,   -lap lambda + g lambda >= 0 on {lambda = 1},
    -lap lambda + g lambda = 0 on {lambda > 1},

summarized by min(lambda - 1, -lap lambda + g lambda) = 0 node-wise.

Two solvers share this contract: projected SOR in fixed lexicographic order
(the default) and a primal-dual active-set method backed by sparse direct
solves (opt-in fast path for large grids).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import poisson
from ._kernels import complementarity_residual, psor_objective, psor_sweep
from .errors import DomainError, GridMismatchError, NonConvergenceError
from .fields import ObstacleField
from .mesh import DiskGrid, ScalarField, laplacian


@dataclass
class ObstacleSolveConfig:
    max_iters: int = 60000
    tol: float = 1e-8
    relaxation: float = 1.5
    method: str = "psor"  # or "active_set"
    check_every: int = 8

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError("projected SOR needs relaxation in (0, 2)")
        if self.method not in ("psor", "active_set"):
            raise ValueError(f"unknown obstacle method {self.method!r}")


@dataclass
class KKTReport:
    max_negativity: float
    max_complementarity: float
    max_interior_residual: float
    contact_fraction: float

    def to_dict(self) -> dict:
        return {
            "max_negativity": self.max_negativity,
            "max_complementarity": self.max_complementarity,
            "max_interior_residual": self.max_interior_residual,
            "contact_fraction": self.contact_fraction,
        }


def default_contact_tol(grid: DiskGrid) -> float:
    """Discrete contact cannot be resolved below stencil error: 10 h^2."""
    return 10.0 * grid.h**2


def _boundary_array(grid: DiskGrid, boundary) -> np.ndarray:
    vals = np.zeros((grid.n, grid.n))
    if np.isscalar(boundary):
        vals[grid.boundary] = float(boundary)
    else:
        boundary = np.asarray(boundary, dtype=np.float64)
        if boundary.shape != (grid.n, grid.n):
            raise GridMismatchError("boundary data must be an (n, n) array or scalar")
        vals[grid.boundary] = boundary[grid.boundary]
    b = vals[grid.boundary]
    if not np.all(np.isfinite(b)) or b.min(initial=np.inf) < 1.0:
        raise DomainError("boundary values for the obstacle factor must be >= 1")
    return vals


def interior_residual(lam: np.ndarray, g: np.ndarray, grid: DiskGrid) -> np.ndarray:
    """-lap lambda + g lambda at interior nodes (zero elsewhere)."""
    lap = laplacian(ScalarField(grid, lam)).values
    r = np.where(grid.interior, -lap + g * lam, 0.0)
    return r


def _psor_solve(lam, g, grid, cfg):
    h2 = grid.h**2
    objective_trace = [psor_objective(lam, g, grid.nonexterior, h2)]
    residual = complementarity_residual(lam, g, grid.interior, h2)
    sweeps = 0
    while residual > cfg.tol and sweeps < cfg.max_iters:
        for _ in range(cfg.check_every):
            psor_sweep(lam, g, grid.interior, h2, cfg.relaxation)
            sweeps += 1
            obj = psor_objective(lam, g, grid.nonexterior, h2)
            if obj > objective_trace[-1] + 1e-10 * (1.0 + abs(objective_trace[-1])):
                raise NonConvergenceError(
                    f"objective increased across a PSOR sweep at sweep {sweeps}",
                    history=objective_trace,
                )
            objective_trace.append(obj)
            if sweeps >= cfg.max_iters:
                break
        residual = complementarity_residual(lam, g, grid.interior, h2)
    return lam, residual, sweeps, objective_trace


def _active_set_solve(lam, g, grid, cfg):
    """Primal-dual active-set iteration; each step is one sparse direct solve."""
    h2 = grid.h**2
    active = grid.interior & (lam <= 1.0)
    known = np.zeros_like(lam)
    known[grid.boundary] = lam[grid.boundary]
    last_sets: list[int] = []
    for it in range(1, min(cfg.max_iters, 200) + 1):
        unknown = grid.interior & ~active
        known_act = known.copy()
        known_act[active] = 1.0
        if unknown.any():
            a, idx, ii, jj = poisson.compact_system(grid, unknown, cdiag=g)
            rhs = poisson.dirichlet_rhs(grid, unknown, ii, jj, known_act)
            x = spla.splu(a).solve(rhs)
            poisson.check_residual(a, x, rhs, what="active-set inner solve")
            lam = known_act.copy()
            lam[ii, jj] = x
        else:
            lam = known_act.copy()
        resid = interior_residual(lam, g, grid)
        grow = grid.interior & (lam < 1.0 - 1e-13)
        release = active & (resid < -1e-13)
        new_active = (active | grow) & ~release
        residual = complementarity_residual(
            np.maximum(lam, np.where(grid.nonexterior, 1.0, 0.0)), g, grid.interior, h2
        )
        if not np.any(new_active ^ active) and residual <= cfg.tol:
            lam = np.maximum(lam, np.where(grid.nonexterior, 1.0, 0.0))
            return lam, residual, it, None
        active = new_active
        last_sets.append(int(active.sum()))
    raise NonConvergenceError(
        f"active-set iteration did not settle within {it} steps",
        history=last_sets,
        report=None,
    )


def solve_obstacle(
    g: ScalarField,
    boundary,
    cfg: ObstacleSolveConfig | None = None,
    *,
    init: np.ndarray | None = None,
) -> ObstacleField:
    """Solve the constrained scalar subproblem for a fixed weight g >= 0.

    ``boundary`` is a scalar or an (n, n) array read on the boundary ring;
    ``init`` optionally warm-starts the iteration (values are clipped to the
    feasible set). Raises DomainError for negative weights and
    NonConvergenceError (carrying the last KKT report) if the complementarity
    residual stays above cfg.tol.
    """
    cfg = cfg or ObstacleSolveConfig()
    grid = g.grid
    gv = g.values
    if gv[grid.nonexterior].min(initial=0.0) < 0.0:
        raise DomainError("obstacle weight g must be nonnegative")
    bvals = _boundary_array(grid, boundary)

    lam = np.where(grid.nonexterior, 1.0, 0.0)
    if init is not None:
        lam[grid.interior] = np.maximum(np.asarray(init)[grid.interior], 1.0)
    lam[grid.boundary] = bvals[grid.boundary]

    if cfg.method == "active_set":
        lam, residual, iters, trace = _active_set_solve(lam, gv, grid, cfg)
    else:
        lam, residual, iters, trace = _psor_solve(lam, gv, grid, cfg)

    if residual > cfg.tol:
        partial = np.maximum(lam, np.where(grid.nonexterior, 1.0, 0.0))
        report = kkt_report(
            ObstacleField(grid, partial), g, default_contact_tol(grid)
        )
        raise NonConvergenceError(
            f"obstacle solve stalled at residual {residual:.3e} > tol {cfg.tol:.1e} "
            f"after {iters} sweeps",
            report=report,
            history=trace,
            partial=partial,
        )
    return ObstacleField(grid, lam)


def kkt_report(lam: ObstacleField, g: ScalarField, contact_tol: float) -> KKTReport:
    """Constraint, complementarity and stationarity diagnostics for a pair (lambda, g)."""
    grid = lam.grid
    if grid != g.grid:
        raise GridMismatchError("lambda and g live on different grids")
    lv = lam.values
    r = interior_residual(lv, g.values, grid)
    inter = grid.interior
    slack = lv - 1.0
    comp = np.minimum(slack[inter], r[inter])
    n_int = int(inter.sum())
    return KKTReport(
        max_negativity=float(max(0.0, -slack[grid.nonexterior].min(initial=0.0))),
        max_complementarity=float(np.max(np.abs(comp), initial=0.0)),
        max_interior_residual=float(np.max(np.abs(r[inter]), initial=0.0)),
        contact_fraction=float((slack[inter] <= contact_tol).sum() / max(n_int, 1)),
    )


def subharmonicity_margin(lam: ObstacleField) -> float:
    """min over interior nodes of the compact discrete Laplacian of lambda."""
    lap = laplacian(lam.as_scalar()).values
    return float(lap[lam.grid.interior].min())


def contact_radius(lam: ObstacleField, tol: float = 1e-9) -> float:
    """Largest node radius in the exact contact set {lambda <= 1 + tol} (nan if empty)."""
    grid = lam.grid
    mask = grid.interior & (lam.values <= 1.0 + tol)
    if not mask.any():
        return float("nan")
    return float(np.sqrt(grid.x[mask] ** 2 + grid.y[mask] ** 2).max())
