"""Sparse 5-point Dirichlet solves shared by the solvers and diagnostics.

Systems are assembled in the scaled form (4 + h^2 c) on the diagonal and -1
off-diagonal, i.e. h^2 (-lap + c); right-hand sides absorb Dirichlet data from
masked-out neighbors. Direct factorizations (SuperLU) keep everything
deterministic; every solve is residual-checked.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergenceError
from .mesh import DiskGrid

_AXIS_SHIFTS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def node_index(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lexicographic numbering of the True nodes of ``mask``."""
    idx = -np.ones(mask.shape, dtype=np.int64)
    ii, jj = np.nonzero(mask)
    idx[ii, jj] = np.arange(ii.size)
    return idx, ii, jj


def compact_system(
    grid: DiskGrid, unknown: np.ndarray, cdiag: np.ndarray | None = None
) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray, np.ndarray]:
    """SPD matrix of h^2(-lap + c) on the unknown nodes.

    Returns (A, idx, ii, jj). Couplings to nodes outside ``unknown`` are left
    to the caller via :func:`dirichlet_rhs`.
    """
    idx, ii, jj = node_index(unknown)
    m = ii.size
    diag = np.full(m, 4.0)
    if cdiag is not None:
        diag = diag + grid.h**2 * cdiag[ii, jj]
    rows = [np.arange(m)]
    cols = [np.arange(m)]
    vals = [diag]
    for di, dj in _AXIS_SHIFTS:
        ni, nj = ii + di, jj + dj
        ok = (ni >= 0) & (ni < grid.n) & (nj >= 0) & (nj < grid.n)
        nbr = np.where(ok, idx[ni % grid.n, nj % grid.n], -1)
        hit = nbr >= 0
        rows.append(np.arange(m)[hit])
        cols.append(nbr[hit])
        vals.append(-np.ones(hit.sum()))
    a = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    return a, idx, ii, jj


def dirichlet_rhs(
    grid: DiskGrid,
    unknown: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
    known_values: np.ndarray,
    source: np.ndarray | None = None,
) -> np.ndarray:
    """RHS collecting Dirichlet neighbors (and -h^2 * source for -lap u = -source).

    ``known_values`` must hold the Dirichlet data at nodes outside ``unknown``
    that a stencil can touch; other entries are ignored.
    """
    rhs = np.zeros(ii.size)
    for di, dj in _AXIS_SHIFTS:
        ni, nj = ii + di, jj + dj
        ok = (ni >= 0) & (ni < grid.n) & (nj >= 0) & (nj < grid.n)
        outside = ok & ~unknown[ni % grid.n, nj % grid.n]
        rhs[outside] += known_values[ni[outside], nj[outside]]
    if source is not None:
        rhs = rhs + grid.h**2 * source[ii, jj]
    return rhs


def check_residual(a, x, rhs, *, tol: float = 1e-9, what: str = "sparse solve"):
    r = a @ x - rhs
    scale = 1.0 + float(np.max(np.abs(rhs), initial=0.0))
    worst = float(np.max(np.abs(r), initial=0.0))
    if not np.isfinite(worst) or worst > tol * scale:
        raise NonConvergenceError(
            f"{what} residual {worst:.3e} above {tol:.1e} (scale {scale:.3e})"
        )


def solve_dirichlet(
    grid: DiskGrid,
    unknown: np.ndarray,
    boundary_values: np.ndarray,
    source: np.ndarray | None = None,
    cdiag: np.ndarray | None = None,
) -> np.ndarray:
    """Solve (-lap + c) u = source on ``unknown`` with Dirichlet data elsewhere.

    Returns the full (n, n) array with boundary data merged in (zero on nodes
    no stencil reaches).
    """
    a, idx, ii, jj = compact_system(grid, unknown, cdiag)
    rhs = dirichlet_rhs(grid, unknown, ii, jj, boundary_values, source=source)
    x = spla.splu(a).solve(rhs)
    check_residual(a, x, rhs, what="compact Dirichlet solve")
    out = np.zeros((grid.n, grid.n))
    out[~unknown] = boundary_values[~unknown]
    out[ii, jj] = x
    return out


def weighted_system(
    grid: DiskGrid, wx: np.ndarray, wy: np.ndarray, unknown: np.ndarray
) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray, np.ndarray]:
    """Edge-weighted 5-point matrix: row m encodes (1/h^2) sum_nb w_mn (u_m - u_nb).

    ``wx[i, j]`` weights the edge (i, j)-(i+1, j); ``wy`` the (i, j)-(i, j+1)
    edge. Dirichlet couplings are dropped (collect them with a known-value
    vector as in :func:`dirichlet_rhs` applied edge-wise by the caller).
    """
    idx, ii, jj = node_index(unknown)
    m = ii.size
    inv_h2 = 1.0 / grid.h**2
    w_of = {
        (1, 0): wx[ii, jj],
        (-1, 0): wx[ii - 1, jj],
        (0, 1): wy[ii, jj],
        (0, -1): wy[ii, jj - 1],
    }
    diag = np.zeros(m)
    rows = []
    cols = []
    vals = []
    for (di, dj), w in w_of.items():
        diag += w
        nbr = idx[ii + di, jj + dj]
        hit = nbr >= 0
        rows.append(np.arange(m)[hit])
        cols.append(nbr[hit])
        vals.append(-w[hit])
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    a = sp.csc_matrix(
        (np.concatenate(vals) * inv_h2, (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    return a, idx, ii, jj


def centered_gradient_matrix(grid: DiskGrid) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse centered gradient: scalars on non-exterior nodes -> 2 rows per interior node.

    Cached on the grid; the divergence matrix is exactly -G^T, which is what
    makes composites assembled from G consistent with the mesh operators.
    """
    cached = grid._cache.get("grad_matrix")
    if cached is not None:
        return cached
    idx_s, si, sj = node_index(grid.nonexterior)
    idx_g, gi, gj = node_index(grid.interior)
    m = gi.size
    inv2h = 1.0 / (2.0 * grid.h)
    rows = []
    cols = []
    vals = []
    for comp, (di, dj) in enumerate(((1, 0), (0, 1))):
        r = 2 * np.arange(m) + comp
        rows.extend([r, r])
        cols.extend([idx_s[gi + di, gj + dj], idx_s[gi - di, gj - dj]])
        vals.extend([np.full(m, inv2h), np.full(m, -inv2h)])
    g = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * m, si.size),
    )
    grid._cache["grad_matrix"] = (g, idx_s)
    return g, idx_s
