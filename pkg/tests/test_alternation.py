import numpy as np
import pytest

from obstaclelab import (
    DomainError,
    JointConfig,
    NonConvergenceError,
    ObstacleSolveConfig,
    SphereSolveConfig,
    assemble_u,
    build_disk_grid,
    resume,
    solve_critical,
    tangential_residual,
)
from obstaclelab.obstacle import contact_radius
from obstaclelab.scenarios import cap_boundary, constant_boundary

import oracles
import runs


def test_constant_scenario_exact():
    grid = build_disk_grid(32)
    cp = solve_critical(grid, constant_boundary(grid, 1.5, 3))
    assert np.abs(cp.lam.values[grid.nonexterior] - 1.5).max() < 1e-9
    assert np.allclose(cp.v.values[grid.nonexterior], [1.0, 0.0, 0.0], atol=1e-12)
    assert cp.joint_report["el"] == {
        "r_direct": 0.0,
        "r_antisym": 0.0,
        "r_conservation": 0.0,
    }
    assert cp.joint_report["tangential_residual"] == 0.0


def test_full_contact_forces_lambda_to_one():
    cp = runs.full_contact_run(64)
    grid = cp.grid
    assert (cp.lam.values[grid.nonexterior] - 1.0).max() <= 1e-6
    assert tangential_residual(cp.lam, cp.v) <= 1e-7
    # cross-check lambda == 1 by direct KKT: residual g >= 0 at contact
    assert cp.joint_report["kkt"]["max_complementarity"] <= 1e-7
    assert cp.joint_report["kkt"]["contact_fraction"] == 1.0


def test_cap_obstacle_energy_against_equivariant_oracle():
    beta, amp = 0.4, 1.3
    cp = runs.cap_run(64, beta, amp)
    e2d = cp.energy_trace[-1]
    oracle = oracles.equivariant_cap_energy(beta, amp, m=10000)
    # for these parameters the unconstrained reduction is feasible and the
    # continuum energy is exactly 2 pi (amp sin beta)^2
    closed = 2.0 * np.pi * (amp * np.sin(beta)) ** 2
    assert oracle == pytest.approx(closed, rel=2e-3)
    assert e2d <= oracle * 1.02
    assert cp.joint_report["kkt"]["contact_fraction"] == 0.0


def test_deep_cap_energy_and_contact_against_oracle():
    beta, amp = 0.8, 1.1
    cp = runs.deep_contact_run(64)
    e2d = cp.energy_trace[-1]
    oracle = oracles.equivariant_cap_energy(beta, amp, m=10000)
    assert e2d <= oracle * 1.02
    # genuine free boundary strictly inside
    frac = cp.joint_report["kkt"]["contact_fraction"]
    assert 0.05 < frac < 0.95
    rc = contact_radius(cp.lam)
    assert 0.2 < rc < 0.9


def test_energy_trace_monotone_within_tolerance():
    for cp in (runs.deep_contact_run(64), runs.full_contact_run(64)):
        trace = np.array(cp.energy_trace)
        tol = 10.0 * cp.config.sphere.tol
        assert np.all(np.diff(trace) <= tol)


def test_admissibility_of_assembled_map():
    cp = runs.deep_contact_run(64)
    norms = np.linalg.norm(assemble_u(cp.lam, cp.v).values, axis=2)
    assert norms[cp.grid.nonexterior].min() >= 1.0 - 1e-9


def test_fixed_point_rerun_reproduces_output():
    cp = runs.deep_contact_run(64)
    again = solve_critical(cp.grid, cp.boundary_u, cp.config)
    tol = 10.0 * cp.config.joint_tol
    assert np.abs(again.lam.values - cp.lam.values).max() <= tol
    assert np.abs(again.v.values - cp.v.values).max() <= tol


def test_resume_zero_iterations_is_identity():
    cp = runs.full_contact_run(64)
    assert resume(cp, 0) is cp


def test_resume_of_converged_point_is_stable():
    cp = runs.full_contact_run(64)
    again = resume(cp, 2)
    tol = 10.0 * cp.config.joint_tol
    assert np.abs(again.lam.values - cp.lam.values).max() <= tol
    assert np.abs(again.v.values - cp.v.values).max() <= tol
    assert again.outer_iters > cp.outer_iters


def test_resume_matches_direct_run_exactly():
    grid = build_disk_grid(48)
    boundary = cap_boundary(grid, 0.8, 1.1)

    def cfg(k):
        return JointConfig(
            max_outer=k,
            obstacle=ObstacleSolveConfig(method="active_set", tol=1e-10),
            sphere=SphereSolveConfig(tol=1e-9),
        )

    with pytest.raises(NonConvergenceError) as one:
        solve_critical(grid, boundary, cfg(1))
    cp1 = one.value.partial
    with pytest.raises(NonConvergenceError) as two:
        solve_critical(grid, boundary, cfg(2))
    cp2 = two.value.partial
    with pytest.raises(NonConvergenceError) as resumed:
        resume(cp1, 1)
    cp_resumed = resumed.value.partial
    assert np.array_equal(cp_resumed.lam.values, cp2.lam.values)
    assert np.array_equal(cp_resumed.v.values, cp2.v.values)
    assert cp_resumed.energy_trace == cp2.energy_trace


def test_subsolver_failure_carries_context():
    grid = build_disk_grid(48)
    cfg = JointConfig(sphere=SphereSolveConfig(max_iters=1, tol=1e-13))
    with pytest.raises(NonConvergenceError) as exc:
        solve_critical(grid, cap_boundary(grid, 0.8, 1.1), cfg)
    assert exc.value.context["half_step"] == "v"
    assert exc.value.context["outer"] == 1
    assert exc.value.partial is not None


def test_boundary_inside_ball_rejected():
    grid = build_disk_grid(32)
    bad = constant_boundary(grid, 0.8, 3)
    with pytest.raises(DomainError):
        solve_critical(grid, bad)


def test_joint_report_contents():
    cp = runs.deep_contact_run(64)
    rep = cp.joint_report
    assert rep["converged"] is True
    assert rep["kkt"]["max_complementarity"] <= rep["joint_tol"]
    assert rep["tangential_residual"] <= rep["joint_tol"]
    for key in ("r_direct", "r_antisym", "r_conservation"):
        assert rep["el"][key] <= rep["el_tol"]
