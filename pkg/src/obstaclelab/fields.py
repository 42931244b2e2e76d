"""Map types for the constrained problem and the split Dirichlet energy.

A map u into R^N \\ B^N is stored through the splitting u = lambda * v with
lambda = |u| >= 1 scalar and v unit-sphere valued. The continuum identity
|grad u|^2 = |grad lambda|^2 + lambda^2 |grad v|^2 relies on v . grad v = 0,
which only holds exactly in the continuum; discretely the two sides agree to
O(h^2), which is what the refinement tests assert.
"""

from __future__ import annotations

import numpy as np

from . import mesh
from .errors import DomainError, GridMismatchError
from .mesh import CovectorField, DiskGrid, ScalarField

SPHERE_TOL = 1e-12
MAP_TOL = 1e-9


class SphereField:
    """Unit vector in R^N per non-exterior node; renormalized on construction."""

    def __init__(self, grid: DiskGrid, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[:2] != (grid.n, grid.n):
            raise GridMismatchError(
                f"sphere values shape {values.shape} incompatible with grid n={grid.n}"
            )
        if values.shape[2] < 2:
            raise DomainError("sphere-valued fields need target dimension N >= 2")
        norms = np.linalg.norm(values, axis=2)
        bad = grid.nonexterior & ((~np.isfinite(norms)) | (norms < 1e-8))
        if np.any(bad):
            raise DomainError(
                f"{int(bad.sum())} nodes have degenerate or non-finite direction vectors"
            )
        vals = np.zeros_like(values)
        nz = grid.nonexterior
        vals[nz] = values[nz] / norms[nz][:, None]
        self.grid = grid
        self.values = vals
        self.values.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @classmethod
    def constant(cls, grid: DiskGrid, direction) -> "SphereField":
        d = np.asarray(direction, dtype=np.float64)
        return cls(grid, np.broadcast_to(d, (grid.n, grid.n, d.size)).copy())

    @classmethod
    def from_function(cls, grid: DiskGrid, fn) -> "SphereField":
        return cls(grid, np.stack(fn(grid.x, grid.y), axis=2))

    def rotated(self, q: np.ndarray) -> "SphereField":
        """Apply a fixed rotation Q node-wise."""
        return SphereField(self.grid, np.einsum("ab,ijb->ija", q, self.values))


class ObstacleField:
    """Scalar factor lambda >= 1 per non-exterior node."""

    def __init__(self, grid: DiskGrid, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise GridMismatchError(
                f"obstacle values shape {values.shape} incompatible with grid n={grid.n}"
            )
        inside = values[grid.nonexterior]
        if not np.all(np.isfinite(inside)):
            raise DomainError("obstacle factor contains non-finite values")
        if inside.min(initial=np.inf) < 1.0 - SPHERE_TOL:
            raise DomainError(
                f"obstacle factor dips to {inside.min()} below the unit constraint"
            )
        vals = values.copy()
        vals[~grid.nonexterior] = 0.0
        self.grid = grid
        self.values = vals
        self.values.flags.writeable = False

    @classmethod
    def constant(cls, grid: DiskGrid, c: float) -> "ObstacleField":
        return cls(grid, np.full((grid.n, grid.n), float(c)))

    def as_scalar(self) -> ScalarField:
        return ScalarField(self.grid, self.values)

    def slack(self) -> ScalarField:
        """mu = lambda - 1 >= 0, the distance to the constraint."""
        mu = np.where(self.grid.nonexterior, self.values - 1.0, 0.0)
        return ScalarField(self.grid, mu)


class MapField:
    """Assembled map u = lambda * v with |u| >= 1 per non-exterior node."""

    def __init__(self, grid: DiskGrid, values: np.ndarray, *, validate: bool = True):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[:2] != (grid.n, grid.n):
            raise GridMismatchError(
                f"map values shape {values.shape} incompatible with grid n={grid.n}"
            )
        norms = np.linalg.norm(values, axis=2)[grid.nonexterior]
        if validate and norms.min(initial=np.inf) < 1.0 - MAP_TOL:
            raise DomainError(f"map enters the forbidden ball: min |u| = {norms.min()}")
        vals = values.copy()
        vals[~grid.nonexterior] = 0.0
        self.grid = grid
        self.values = vals
        self.values.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def assemble_u(lam: ObstacleField, v: SphereField) -> MapField:
    """u = lambda * v node-wise; |u| equals lambda to rounding."""
    if lam.grid is not v.grid and lam.grid != v.grid:
        raise GridMismatchError("obstacle factor and direction live on different grids")
    return MapField(v.grid, lam.values[:, :, None] * v.values)


def map_gradient(field) -> CovectorField:
    """Centered gradient of a multi-channel map (SphereField or MapField)."""
    return mesh.gradient_stack(field.grid, field.values)


def dirichlet_energy(u: MapField) -> float:
    """Sum of |grad u|^2 h^2 over the gradient support."""
    g = map_gradient(u)
    dens = np.einsum("ijck,ijck->ij", g.values, g.values)
    return mesh.integrate(u.grid, dens, g.support)


def split_energy(lam: ObstacleField, v: SphereField) -> tuple[float, float]:
    """(sum |grad lambda|^2 h^2, sum lambda^2 |grad v|^2 h^2) over the interior."""
    if lam.grid != v.grid:
        raise GridMismatchError("obstacle factor and direction live on different grids")
    gl = mesh.gradient(lam.as_scalar())
    e_lam = mesh.integrate(lam.grid, np.einsum("ijck,ijck->ij", gl.values, gl.values), gl.support)
    gv = map_gradient(v)
    dens = lam.values**2 * np.einsum("ijck,ijck->ij", gv.values, gv.values)
    e_v = mesh.integrate(v.grid, dens, gv.support)
    return e_lam, e_v


def weight_field(lam: ObstacleField, v: SphereField) -> ScalarField:
    """g = |grad v|^2, the weight the scalar subproblem sees (zero off support)."""
    if lam.grid != v.grid:
        raise GridMismatchError("obstacle factor and direction live on different grids")
    gv = map_gradient(v)
    dens = np.einsum("ijck,ijck->ij", gv.values, gv.values)
    dens[~gv.support] = 0.0
    return ScalarField(v.grid, dens)
