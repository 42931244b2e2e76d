"""Alternating driver coupling the scalar obstacle solve and the direction solve.

One outer cycle is: (1) minimize over the direction v at the current lambda,
(2) recompute the weight g = |grad v|^2 from scratch, (3) minimize over
lambda at that weight. Both half-steps are descent steps for the joint energy
(the lambda subproblem is convex and solved to tolerance, the v subproblem
backtracks), so the recorded energy trace is nonincreasing up to solver
tolerances. The loop stops when the relative energy decrease over a cycle
stagnates AND the joint residuals (complementarity, tangential residual) are
below the joint tolerance; energy stagnation alone can mask an unconverged
constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonConvergenceError
from .fields import ObstacleField, SphereField, assemble_u, split_energy
from .mesh import DiskGrid
from .obstacle import (
    ObstacleSolveConfig,
    default_contact_tol,
    kkt_report,
    solve_obstacle,
)
from .poisson import solve_dirichlet
from .sphere import (
    SphereSolveConfig,
    edge_pair_energy,
    edge_weight_field,
    el_residuals,
    solve_sphere,
    tangential_residual,
)


@dataclass
class JointConfig:
    max_outer: int = 80
    joint_tol: float = 1e-7
    energy_stagnation: float = 1e-10
    el_tol: float | None = None  # default: resolution-scaled, see joint_el_tol
    obstacle: ObstacleSolveConfig = field(default_factory=ObstacleSolveConfig)
    sphere: SphereSolveConfig = field(default_factory=SphereSolveConfig)

    def __post_init__(self):
        if self.joint_tol <= 0 or self.energy_stagnation <= 0:
            raise ValueError("tolerances must be positive")


def joint_el_tol(grid: DiskGrid, lambda_bound: float, cfg: JointConfig) -> float:
    """Euler-Lagrange residuals measure discretization error, so the joint
    threshold scales with h (and the problem's curvature scale)."""
    if cfg.el_tol is not None:
        return cfg.el_tol
    return 6.0 * grid.h * max(1.0, lambda_bound)


@dataclass
class CriticalPoint:
    lam: ObstacleField
    v: SphereField
    energy_trace: list[float]
    joint_report: dict
    boundary_u: np.ndarray
    config: JointConfig
    outer_iters: int
    converged: bool

    @property
    def grid(self) -> DiskGrid:
        return self.lam.grid


def _decompose_boundary(grid: DiskGrid, boundary_u: np.ndarray):
    boundary_u = np.asarray(boundary_u, dtype=np.float64)
    if boundary_u.ndim != 3 or boundary_u.shape[:2] != (grid.n, grid.n):
        raise DomainError("boundary_u must be an (n, n, N) array")
    norms = np.linalg.norm(boundary_u, axis=2)
    on_b = norms[grid.boundary]
    if on_b.size == 0 or not np.all(np.isfinite(on_b)) or on_b.min() < 1.0 - 1e-12:
        raise DomainError("boundary data must satisfy |u| >= 1 on the boundary ring")
    lam_b = np.zeros((grid.n, grid.n))
    lam_b[grid.boundary] = np.maximum(norms[grid.boundary], 1.0)
    v_b = np.zeros_like(boundary_u)
    v_b[grid.boundary] = boundary_u[grid.boundary] / norms[grid.boundary][:, None]
    return lam_b, v_b


def _half_step_energy(lam, v) -> float:
    """Joint energy in the edge quadrature both half-steps actually descend."""
    e_lam, e_v = edge_pair_energy(lam, v)
    return e_lam + e_v


def _run_outer(state: dict, extra_outer: int, cfg: JointConfig) -> dict:
    """Advance the alternation by up to extra_outer cycles (mutates a copy)."""
    grid = state["grid"]
    lam: ObstacleField = state["lam"]
    v: SphereField | None = state["v"]
    lam_b, v_b = state["lam_b"], state["v_b"]
    trace: list[float] = list(state["trace"])
    outer = state["outer"]
    prev_energy = trace[-1] if trace else np.inf

    g = state.get("g")
    for _ in range(extra_outer):
        outer += 1
        try:
            v = solve_sphere(lam, v_b, init=v, cfg=cfg.sphere)
        except NonConvergenceError as err:
            err.context = {"half_step": "v", "outer": outer}
            err.partial = _package(state | {"lam": lam, "v": v, "trace": trace,
                                            "outer": outer}, cfg, converged=False)
            raise
        trace.append(_half_step_energy(lam, v))

        g = edge_weight_field(v)
        try:
            lam = solve_obstacle(g, lam_b, cfg.obstacle, init=lam.values)
        except NonConvergenceError as err:
            err.context = {"half_step": "lambda", "outer": outer}
            err.partial = _package(state | {"lam": lam, "v": v, "trace": trace,
                                            "outer": outer, "g": g}, cfg, converged=False)
            raise
        trace.append(_half_step_energy(lam, v))

        u_min = np.linalg.norm(assemble_u(lam, v).values, axis=2)[grid.nonexterior].min()
        if u_min < 1.0 - 1e-9:
            raise DomainError(f"assembled map dips to |u| = {u_min} inside the ball")

        energy = trace[-1]
        stagnated = abs(prev_energy - energy) <= cfg.energy_stagnation * (1.0 + abs(energy))
        prev_energy = energy
        kkt = kkt_report(lam, g, default_contact_tol(grid))
        tres = tangential_residual(lam, v)
        if stagnated and kkt.max_complementarity <= cfg.joint_tol and tres <= cfg.joint_tol:
            state = state | {"lam": lam, "v": v, "trace": trace, "outer": outer, "g": g}
            state["converged"] = True
            return state
    return state | {"lam": lam, "v": v, "trace": trace, "outer": outer, "g": g,
                    "converged": False}


def _package(state: dict, cfg: JointConfig, converged: bool) -> CriticalPoint:
    grid = state["grid"]
    lam, v = state["lam"], state["v"]
    report: dict = {"outer_iters": state["outer"], "converged": converged}
    if v is not None:
        g = edge_weight_field(v)
        kkt = kkt_report(lam, g, default_contact_tol(grid))
        r_direct, r_antisym, r_cons = el_residuals(lam, v)
        lam_bound = float((lam.values * g.values)[grid.interior].max(initial=0.0))
        e_lam_c, e_v_c = split_energy(lam, v)
        report.update(
            kkt=kkt.to_dict(),
            el={"r_direct": r_direct, "r_antisym": r_antisym, "r_conservation": r_cons},
            tangential_residual=tangential_residual(lam, v),
            lambda_bound=lam_bound,
            joint_tol=cfg.joint_tol,
            el_tol=joint_el_tol(grid, lam_bound, cfg),
            split_energy_centered={"e_lambda": e_lam_c, "e_v": e_v_c},
            sphere_iters=len(getattr(v, "history", ())),
        )
    return CriticalPoint(
        lam=lam,
        v=v,
        energy_trace=list(state["trace"]),
        joint_report=report,
        boundary_u=state["boundary_u"],
        config=cfg,
        outer_iters=state["outer"],
        converged=converged,
    )


def solve_critical(grid: DiskGrid, boundary_u: np.ndarray, cfg: JointConfig | None = None) -> CriticalPoint:
    """Alternate the two subproblem solvers to a joint critical point.

    ``boundary_u`` is an (n, n, N) array read on the boundary ring with
    |u| >= 1 there; it is split internally into lambda_b = |u_b| and
    v_b = u_b / |u_b|. Raises NonConvergenceError (with half-step context and
    the partial checkpoint attached) if either subsolver fails or the outer
    loop exhausts max_outer; the returned point passes the joint KKT,
    tangential and Euler-Lagrange thresholds.
    """
    cfg = cfg or JointConfig()
    boundary_u = np.asarray(boundary_u, dtype=np.float64)
    lam_b, v_b = _decompose_boundary(grid, boundary_u)

    lam_init = solve_dirichlet(grid, grid.interior, lam_b)
    lam = ObstacleField(grid, np.where(grid.nonexterior, np.maximum(lam_init, 1.0), 0.0))

    state = {
        "grid": grid,
        "lam": lam,
        "v": None,
        "g": None,
        "lam_b": lam_b,
        "v_b": v_b,
        "boundary_u": boundary_u,
        "trace": [],
        "outer": 0,
        "converged": False,
    }
    state = _run_outer(state, cfg.max_outer, cfg)
    cp = _package(state, cfg, state["converged"])
    if not state["converged"]:
        raise NonConvergenceError(
            f"alternation did not meet joint tolerances within {cfg.max_outer} outer cycles",
            context={"half_step": "outer", "outer": state["outer"]},
            partial=cp,
            report=cp.joint_report,
        )
    _check_joint(cp, cfg)
    return cp


def _check_joint(cp: CriticalPoint, cfg: JointConfig):
    rep = cp.joint_report
    el_tol = rep["el_tol"]
    bad = {
        k: val
        for k, val in (
            ("complementarity", rep["kkt"]["max_complementarity"]),
            ("tangential", rep["tangential_residual"]),
        )
        if val > cfg.joint_tol
    }
    for k, val in rep["el"].items():
        if val > el_tol:
            bad[k] = val
    if bad:
        raise NonConvergenceError(
            f"joint residuals above tolerance at convergence: {bad}",
            report=rep,
            partial=cp,
        )


def resume(cp: CriticalPoint, extra_iters: int) -> CriticalPoint:
    """Continue a (possibly partial) checkpoint for extra outer cycles.

    Zero extra cycles returns the checkpoint unchanged. The outer loop is a
    pure function of (lambda, v), so resuming k then m cycles matches a
    single (k+m)-cycle run bit for bit.
    """
    if extra_iters < 0:
        raise DomainError("extra_iters must be nonnegative")
    if extra_iters == 0:
        return cp
    cfg = cp.config
    grid = cp.grid
    lam_b, v_b = _decompose_boundary(grid, cp.boundary_u)
    state = {
        "grid": grid,
        "lam": cp.lam,
        "v": cp.v,
        "g": None,
        "lam_b": lam_b,
        "v_b": v_b,
        "boundary_u": cp.boundary_u,
        "trace": list(cp.energy_trace),
        "outer": cp.outer_iters,
        "converged": cp.converged,
    }
    if cp.converged:
        # a converged point re-enters the loop but must reproduce itself
        state["converged"] = False
    state = _run_outer(state, extra_iters, cfg)
    converged = state["converged"]
    out = _package(state, cfg, converged)
    if not converged:
        raise NonConvergenceError(
            f"alternation still above joint tolerances after {extra_iters} resumed cycles",
            context={"half_step": "outer", "outer": state["outer"]},
            partial=out,
            report=out.joint_report,
        )
    _check_joint(out, cfg)
    return out
