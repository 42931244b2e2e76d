import numpy as np
import pytest

from obstaclelab import (
    DomainError,
    NonConvergenceError,
    ObstacleField,
    SphereField,
    SphereSolveConfig,
    antisym_potential,
    build_disk_grid,
    el_residuals,
    solve_sphere,
    split_energy,
    tangential_residual,
)
from obstaclelab.fields import map_gradient
from obstaclelab.scenarios import cap_boundary, harmonic_angle_exp_boundary

import oracles
import runs


def _smooth_noncritical(grid, dim=3, seed=2):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, size=6)
    phi = c[0] * grid.x + c[1] * grid.y + c[2] * grid.x * grid.y
    psi = c[3] * grid.x**2 + c[4] * np.sin(grid.y) + c[5]
    comps = [np.cos(phi), np.sin(phi) * np.cos(psi), np.sin(phi) * np.sin(psi)][:dim]
    return SphereField(grid, np.stack(comps, axis=2))


def test_constant_boundary_returns_constant_immediately():
    grid = build_disk_grid(32)
    lam = ObstacleField(grid, 1.0 + 0.3 * (1 - grid.x**2 - grid.y**2))
    b = np.zeros((32, 32, 3))
    b[:, :, 0] = 1.0
    v = solve_sphere(lam, b)
    assert np.allclose(v.values[grid.nonexterior], [1.0, 0.0, 0.0], atol=1e-14)
    assert tangential_residual(lam, v) == 0.0
    assert len(v.history) == 1


def test_linear_harmonic_phase_is_exact_discrete_critical_point():
    err = runs.harmonic_angle_error(64, exact_phase=True)
    assert err <= 1e-9


def test_generic_harmonic_phase_second_order():
    errs = [runs.harmonic_angle_error(n, exact_phase=False) for n in (32, 64, 128)]
    hs = [2 / 31, 2 / 63, 2 / 127]
    assert oracles.fit_order(hs, errs) >= 1.8
    # calibrated constant: err <= C h^2 with C from the coarsest level
    c_cal = errs[0] / hs[0] ** 2
    assert errs[2] <= 1.5 * c_cal * hs[2] ** 2


def test_explicit_flow_agrees_with_preconditioned():
    grid = build_disk_grid(32)
    lam = ObstacleField.constant(grid, 1.0)
    b = harmonic_angle_exp_boundary(grid, 1.5)
    fast = solve_sphere(lam, b, cfg=SphereSolveConfig(tol=1e-8))
    slow = solve_sphere(
        lam, b, cfg=SphereSolveConfig(tol=1e-4, max_iters=20000, preconditioned=False)
    )
    assert np.abs(fast.values - slow.values).max() < 2e-3


def test_latitude_cap_energy_below_cone_comparison():
    beta = 0.4
    cp_free = runs.full_contact_run(64)
    lam, v = cp_free.lam, cp_free.v
    assert tangential_residual(lam, v) <= 1e-7
    _, e_v = split_energy(lam, v)
    cone = oracles.cap_cone_energy(beta)
    harm = oracles.cap_harmonic_energy(beta)
    assert e_v <= cone + 1e-9
    assert 0.9 * harm <= e_v <= harm + 1e-6


def test_energy_monotone_across_accepted_steps():
    grid = build_disk_grid(48)
    lam = ObstacleField.constant(grid, 1.0)
    v = solve_sphere(lam, cap_boundary(grid, 0.8, 1.0), cfg=SphereSolveConfig(tol=1e-9))
    energies = [e for _, e, _ in v.history]
    slack = 64 * np.finfo(float).eps * (1 + max(energies))
    assert all(b <= a + slack for a, b in zip(energies, energies[1:]))


def test_antisym_potential_constant_vanishes():
    grid = build_disk_grid(16)
    omega = antisym_potential(SphereField.constant(grid, [0.0, 1.0, 0.0]))
    assert np.abs(omega.values[omega.support]).max() == 0.0


def test_antisym_potential_matches_analytic_phase_gradient():
    grid = build_disk_grid(64)
    rate = 1.5
    phi = rate * np.exp(grid.x) * np.sin(grid.y)
    v = SphereField(grid, np.stack([np.cos(phi), np.sin(phi)], axis=2))
    omega = antisym_potential(v)
    grad_phi = np.stack(
        [rate * np.exp(grid.x) * np.sin(grid.y), rate * np.exp(grid.x) * np.cos(grid.y)],
        axis=2,
    )
    # Omega_12 = v^2 grad v^1 - v^1 grad v^2 = -grad phi, to O(h^2)
    err = np.abs(omega.values[:, :, 0, :] + grad_phi)[omega.support].max()
    assert err < 30.0 * grid.h**2

    grid2 = build_disk_grid(128)
    phi2 = rate * np.exp(grid2.x) * np.sin(grid2.y)
    v2 = SphereField(grid2, np.stack([np.cos(phi2), np.sin(phi2)], axis=2))
    om2 = antisym_potential(v2)
    gp2 = np.stack(
        [rate * np.exp(grid2.x) * np.sin(grid2.y), rate * np.exp(grid2.x) * np.cos(grid2.y)],
        axis=2,
    )
    err2 = np.abs(om2.values[:, :, 0, :] + gp2)[om2.support].max()
    assert err2 < 0.35 * err


def test_antisym_storage_is_antisymmetric_and_bounded():
    grid = build_disk_grid(32)
    v = _smooth_noncritical(grid)
    omega = antisym_potential(v)
    assert np.array_equal(omega.pair(1, 0), -omega.pair(0, 1))
    assert np.array_equal(omega.pair(2, 2), np.zeros_like(omega.pair(2, 2)))
    grad = map_gradient(v)
    omega_mag = omega.as_covector().pointwise_norm()
    grad_mag = grad.pointwise_norm()
    mask = omega.support
    assert np.all(omega_mag[mask] <= 2.0 * grad_mag[mask] + 1e-12)


def test_el_residuals_zero_for_constant():
    grid = build_disk_grid(32)
    lam = ObstacleField.constant(grid, 1.3)
    v = SphereField.constant(grid, [0.0, 0.0, 1.0])
    assert el_residuals(lam, v) == (0.0, 0.0, 0.0)


def test_el_residuals_refine_and_separate_noncritical():
    r64 = el_residuals(runs.full_contact_run(64).lam, runs.full_contact_run(64).v)
    r128 = el_residuals(runs.full_contact_run(128).lam, runs.full_contact_run(128).v)
    for a, b in zip(r128, r64):
        assert a < 0.5 * b  # order >= 1 between successive levels
    grid = build_disk_grid(64)
    lam = ObstacleField.constant(grid, 1.0)
    noncrit = el_residuals(lam, _smooth_noncritical(grid))
    assert noncrit[2] >= 10.0 * r64[2]
    assert noncrit[2] > 0.0


def test_tangency_identity_refines():
    import obstaclelab.mesh as mesh
    from obstaclelab.sphere import _weighted_flux

    devs = {}
    for n in (64, 128):
        cp = runs.full_contact_run(n)
        grid = cp.lam.grid
        grad = map_gradient(cp.v)
        flux = _weighted_flux(cp.lam, grad)
        div_flux = mesh.divergence_channels(flux)
        gdens = np.einsum("ijck,ijck->ij", grad.values, grad.values)
        inner = np.einsum("ijc,ijc->ij", div_flux, cp.v.values)
        dev = inner + cp.lam.values**2 * gdens
        clean = grid.shrink(flux.support) & (grid.x**2 + grid.y**2 < 0.81)
        devs[n] = np.abs(dev[clean]).max()
    assert devs[128] < 0.6 * devs[64]


def test_two_el_forms_agree_to_first_order():
    diffs = {}
    for n in (64, 128):
        grid = build_disk_grid(n)
        lam = ObstacleField(grid, 1.0 + 0.2 * (1 - grid.x**2 - grid.y**2))
        v = _smooth_noncritical(grid, seed=4)
        r_direct, r_antisym, _ = el_residuals(lam, v)
        diffs[n] = abs(r_direct - r_antisym)
        assert diffs[n] <= 0.5 * grid.h * max(r_direct, r_antisym, 1.0)
    assert diffs[128] < 0.7 * diffs[64]


def test_rotation_equivariance_of_solver():
    grid = build_disk_grid(32)
    lam = ObstacleField(grid, 1.0 + 0.3 * (1 - grid.x**2 - grid.y**2))
    b = cap_boundary(grid, 0.7, 1.0)
    rng = np.random.default_rng(9)
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    cfg = SphereSolveConfig(tol=1e-9)
    v_plain = solve_sphere(lam, b, cfg=cfg)
    b_rot = np.einsum("ab,ijb->ija", q, b)
    v_rot = solve_sphere(lam, b_rot, cfg=cfg)
    assert np.abs(v_rot.values - v_plain.rotated(q).values).max() <= 10.0 * cfg.tol


def test_nonunit_boundary_rejected():
    grid = build_disk_grid(16)
    lam = ObstacleField.constant(grid, 1.0)
    bad = np.full((16, 16, 2), 0.5)
    with pytest.raises(DomainError):
        solve_sphere(lam, bad)


def test_non_convergence_carries_history():
    grid = build_disk_grid(32)
    lam = ObstacleField.constant(grid, 1.0)
    b = harmonic_angle_exp_boundary(grid, 1.5)
    with pytest.raises(NonConvergenceError) as exc:
        solve_sphere(lam, b, cfg=SphereSolveConfig(max_iters=1, tol=1e-12))
    assert exc.value.history is not None
    assert len(exc.value.history) >= 1


def test_config_validation():
    with pytest.raises(ValueError):
        SphereSolveConfig(tol=-1.0)
    with pytest.raises(ValueError):
        SphereSolveConfig(backtracking=1.0)
