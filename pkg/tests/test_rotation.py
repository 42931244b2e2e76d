import numpy as np
import pytest

from obstaclelab import (
    DomainError,
    ObstacleField,
    RotationField,
    RotationSolveConfig,
    SphereField,
    SphereSolveConfig,
    build_disk_grid,
    rotation_conservation_residual,
    solve_rotation,
    solve_sphere,
)
from obstaclelab.rotation import (
    expm_antisym,
    hs_dirichlet_energy,
    orthogonality_defect,
    rotation_split_energy,
    symmetry_defect,
)
from obstaclelab.scenarios import so2_boundary, so3_smooth_boundary
from obstaclelab.sphere import el_residuals

import oracles


def _so2_pair(n, rate=1.5, tol=1e-9):
    grid = build_disk_grid(n)
    lam = ObstacleField.constant(grid, 1.0)
    p = solve_rotation(lam, so2_boundary(grid, rate), cfg=RotationSolveConfig(tol=tol))
    theta_b = rate * grid.x
    v = solve_sphere(
        lam,
        np.stack([np.cos(theta_b), np.sin(theta_b)], axis=2),
        cfg=SphereSolveConfig(tol=tol),
    )
    return grid, lam, p, v


def test_expm_antisym_blocks_are_rotations():
    rng = np.random.default_rng(0)
    for dim in (2, 3, 4):
        raw = rng.standard_normal((40, dim, dim))
        a = 0.5 * (raw - np.swapaxes(raw, 1, 2))
        r = expm_antisym(a)
        gram = np.einsum("mki,mkj->mij", r, r) - np.eye(dim)
        assert np.abs(gram).max() < 1e-12
        assert np.linalg.det(r).min() > 0.0
        # against scipy for one sample
        import scipy.linalg

        assert np.allclose(r[0], scipy.linalg.expm(a[0]), atol=1e-12)


def test_identity_boundary_returns_identity():
    grid = build_disk_grid(32)
    lam = ObstacleField.constant(grid, 1.0)
    boundary = RotationField.constant(grid, np.eye(3))
    p = solve_rotation(lam, boundary)
    assert np.abs(p.values[grid.nonexterior] - np.eye(3)).max() < 1e-12
    assert p.history[-1][2] == 0.0
    assert rotation_conservation_residual(lam, p) == 0.0


def test_so2_harmonic_angle_is_exact_critical_point():
    grid, lam, p, _ = _so2_pair(48)
    theta = 1.5 * grid.x
    ang = np.arctan2(p.values[:, :, 1, 0], p.values[:, :, 0, 0])
    err = np.abs(np.angle(np.exp(1j * (ang - theta))))[grid.nonexterior].max()
    assert err <= 1e-9
    assert p.orthogonality_drift <= 1e-10


def test_so2_sphere_crosscheck():
    grid, lam, p, v = _so2_pair(64)
    e_p = p.history[-1][1]
    e_v = v.history[-1][1]
    # Frobenius doubles the circle energy: |dP|^2 = 2 |dv|^2 exactly
    assert abs(e_p - 2.0 * e_v) <= 1e-6
    rc_p = rotation_conservation_residual(lam, p)
    rc_v = el_residuals(lam, v)[2]
    assert rc_p <= 1.1 * max(rc_v, 1e-12) + 1e-9
    assert rc_v <= 1.1 * max(rc_p, 1e-12) + 1e-9


def test_so2_generic_phase_second_order_against_sphere():
    rate = 1.2
    errs = {}
    for n in (32, 64):
        grid = build_disk_grid(n)
        lam = ObstacleField.constant(grid, 1.0)
        theta_b = rate * np.exp(grid.x) * np.sin(grid.y)
        p = solve_rotation(
            lam, RotationField.from_angle(grid, theta_b), cfg=RotationSolveConfig(tol=1e-9)
        )
        ang = np.arctan2(p.values[:, :, 1, 0], p.values[:, :, 0, 0])
        errs[n] = np.abs(np.angle(np.exp(1j * (ang - theta_b))))[grid.nonexterior].max()
    assert errs[64] <= 0.35 * errs[32]


def test_so3_smooth_boundary_converges_with_tiny_drift():
    grid = build_disk_grid(64)
    lam = ObstacleField.constant(grid, 1.0)
    p = solve_rotation(lam, so3_smooth_boundary(grid, 0), cfg=RotationSolveConfig(tol=1e-8))
    assert p.orthogonality_drift <= 1e-10
    assert orthogonality_defect(grid, p.values) <= 1e-10
    assert p.history[-1][2] <= 1e-8


def test_noncritical_field_has_much_larger_conservation_residual():
    grid = build_disk_grid(64)
    lam = ObstacleField.constant(grid, 1.0)
    boundary = so3_smooth_boundary(grid, 0)
    p = solve_rotation(lam, boundary, cfg=RotationSolveConfig(tol=1e-8))
    converged = rotation_conservation_residual(lam, p)
    # the boundary extension itself is smooth but not critical
    noncritical = rotation_conservation_residual(lam, boundary)
    assert noncritical >= 10.0 * max(converged, 1e-12)


def test_maurer_cartan_symmetry_defect_refines():
    defects = {}
    for n in (32, 64):
        grid = build_disk_grid(n)
        defects[n] = symmetry_defect(so3_smooth_boundary(grid, 1, scale=0.5))
    assert defects[64] <= 0.6 * defects[32]


def test_hilbert_schmidt_splitting_with_dimension_factor():
    gaps = {}
    for n in (32, 64, 128):
        grid = build_disk_grid(n)
        lam = ObstacleField(grid, 1.0 + 0.3 * (1.0 - grid.x**2 - grid.y**2))
        p = so3_smooth_boundary(grid, 2, scale=0.5)
        d_hs = hs_dirichlet_energy(lam, p)
        e_lam, e_p = rotation_split_energy(lam, p)
        total = p.dim * e_lam + e_p
        gaps[n] = abs(d_hs - total) / (total + 1.0)
    assert gaps[64] < 0.05
    order = oracles.fit_order([2 / 31, 2 / 63, 2 / 127], [gaps[32], gaps[64], gaps[128]])
    assert order >= 1.0


def test_non_orthogonal_boundary_rejected():
    grid = build_disk_grid(16)
    bad = np.broadcast_to(np.eye(2) * 1.5, (16, 16, 2, 2)).copy()
    with pytest.raises(DomainError):
        RotationField(grid, bad)
    reflection = np.broadcast_to(np.diag([1.0, -1.0]), (16, 16, 2, 2)).copy()
    with pytest.raises(DomainError):
        RotationField(grid, reflection)


def test_rotation_field_angle_roundtrip():
    grid = build_disk_grid(16)
    theta = 0.3 * grid.x - 0.2 * grid.y
    p = RotationField.from_angle(grid, theta)
    ang = np.arctan2(p.values[:, :, 1, 0], p.values[:, :, 0, 0])
    assert np.abs(ang - theta)[grid.nonexterior].max() < 1e-14
