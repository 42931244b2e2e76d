"""Uniform Cartesian lattice masked to the unit disk and its discrete calculus.

The grid covers [-1, 1]^2 with n nodes per axis, spacing h = 2/(n-1); values
are stored as (n, n) arrays indexed [i, j] with x = -1 + i*h, y = -1 + j*h.
Nodes strictly inside the unit circle are non-exterior; non-exterior nodes
whose four axis neighbors are all non-exterior are interior, the remaining
non-exterior ones form the staircase boundary ring where Dirichlet data is
imposed.

Operator conventions:

* ``gradient`` uses centered differences, supported exactly on the interior
  mask (both axis neighbors are then non-exterior). Exact on affine functions
  and, component-wise, on quadratics.
* ``divergence`` is the exact negative adjoint of ``gradient`` under the
  h^2-weighted node inner product (covector values outside the support mask
  count as zero), so the discrete integration-by-parts identity holds to
  rounding for arbitrary fields.
* ``laplacian`` is the standard compact 5-point stencil on interior nodes.
  It is not the literal composition divergence(gradient(f)) -- that composite
  has 2h spacing -- but agrees with it on quadratics and to O(h^2) on smooth
  fields; the compact stencil is the one every obstacle/viscosity diagnostic
  uses.

All reductions run over fixed C-order arrays so results are bitwise
deterministic run to run.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, GridMismatchError, InvalidResolutionError

INTERIOR = 0
BOUNDARY = 1
EXTERIOR = 2

_CLASS_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", EXTERIOR: "exterior"}


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class DiskGrid:
    """Lattice of n x n nodes on [-1, 1]^2 classified against the unit disk."""

    def __init__(self, n: int):
        if n < 8:
            raise InvalidResolutionError(f"need n >= 8 nodes per axis, got {n}")
        self.n = int(n)
        self.h = 2.0 / (n - 1)
        self.xs = _freeze(np.linspace(-1.0, 1.0, n))
        x, y = np.meshgrid(self.xs, self.xs, indexing="ij")
        self.x = _freeze(x)
        self.y = _freeze(y)

        nonext = x * x + y * y < 1.0
        interior = np.zeros_like(nonext)
        interior[1:-1, 1:-1] = (
            nonext[1:-1, 1:-1]
            & nonext[:-2, 1:-1]
            & nonext[2:, 1:-1]
            & nonext[1:-1, :-2]
            & nonext[1:-1, 2:]
        )
        boundary = nonext & ~interior

        node_class = np.full((n, n), EXTERIOR, dtype=np.int8)
        node_class[interior] = INTERIOR
        node_class[boundary] = BOUNDARY

        self.nonexterior = _freeze(nonext)
        self.interior = _freeze(interior)
        self.boundary = _freeze(boundary)
        self.node_class = _freeze(node_class)
        self._cache: dict = {}

    def __repr__(self):
        return f"DiskGrid(n={self.n})"

    def __eq__(self, other):
        return isinstance(other, DiskGrid) and other.n == self.n

    def __hash__(self):
        return hash(("DiskGrid", self.n))

    def shrink(self, mask: np.ndarray) -> np.ndarray:
        """Nodes of ``mask`` whose four axis neighbors are all in ``mask``."""
        out = np.zeros_like(mask)
        out[1:-1, 1:-1] = (
            mask[1:-1, 1:-1]
            & mask[:-2, 1:-1]
            & mask[2:, 1:-1]
            & mask[1:-1, :-2]
            & mask[1:-1, 2:]
        )
        return out

    def ball_mask(self, center, r: float, *, pad: float = 0.0) -> np.ndarray:
        """Boolean mask of nodes with |x - center| < r; the ball must sit in the disk."""
        cx, cy = float(center[0]), float(center[1])
        if np.hypot(cx, cy) + r > 1.0 + 1e-12 + pad:
            raise DomainError(
                f"ball B(({cx}, {cy}), {r}) is not contained in the unit disk"
            )
        return (self.x - cx) ** 2 + (self.y - cy) ** 2 < r * r


def build_disk_grid(n: int) -> DiskGrid:
    """Build the masked lattice; raises InvalidResolutionError for n < 8."""
    return DiskGrid(n)


class ScalarField:
    """One real value per non-exterior node (exterior entries are zero)."""

    def __init__(self, grid: DiskGrid, values: np.ndarray, *, validate: bool = True):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise GridMismatchError(
                f"scalar values shape {values.shape} does not match grid n={grid.n}"
            )
        if validate and not np.all(np.isfinite(values[grid.nonexterior])):
            raise DomainError("scalar field contains non-finite values")
        vals = values.copy()
        vals[~grid.nonexterior] = 0.0
        self.grid = grid
        self.values = _freeze(vals)

    @classmethod
    def constant(cls, grid: DiskGrid, c: float) -> "ScalarField":
        return cls(grid, np.full((grid.n, grid.n), float(c)))

    @classmethod
    def from_function(cls, grid: DiskGrid, fn) -> "ScalarField":
        return cls(grid, fn(grid.x, grid.y))


class CovectorField:
    """A 2-vector per channel on the nodes of a declared support mask."""

    def __init__(
        self,
        grid: DiskGrid,
        values: np.ndarray,
        support: np.ndarray,
        *,
        validate: bool = True,
    ):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim == 3:
            values = values[:, :, None, :]
        if values.ndim != 4 or values.shape[:2] != (grid.n, grid.n) or values.shape[3] != 2:
            raise GridMismatchError(
                f"covector values shape {values.shape} incompatible with grid n={grid.n}"
            )
        support = np.asarray(support, dtype=bool)
        if support.shape != (grid.n, grid.n):
            raise GridMismatchError("support mask shape does not match grid")
        if validate and not np.all(np.isfinite(values[support])):
            raise DomainError("covector field contains non-finite values on its support")
        vals = values.copy()
        vals[~support] = 0.0
        self.grid = grid
        self.values = _freeze(vals)
        self.support = _freeze(support.copy())

    @property
    def channel_count(self) -> int:
        return self.values.shape[2]

    def pointwise_norm(self) -> np.ndarray:
        """Euclidean length over (channel, component) at every node."""
        return np.sqrt(np.einsum("ijck,ijck->ij", self.values, self.values))


def _gradient_values(grid: DiskGrid, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences of stacked (n, n, C) values on the interior mask."""
    n, h = grid.n, grid.h
    c = values.shape[2]
    out = np.zeros((n, n, c, 2))
    sl = slice(1, -1)
    out[sl, sl, :, 0] = (values[2:, sl] - values[:-2, sl]) / (2.0 * h)
    out[sl, sl, :, 1] = (values[sl, 2:] - values[sl, :-2]) / (2.0 * h)
    out[~grid.interior] = 0.0
    return out, grid.interior.copy()


def gradient(f: ScalarField) -> CovectorField:
    """Centered-difference gradient; support mask = interior nodes."""
    vals, support = _gradient_values(f.grid, f.values[:, :, None])
    return CovectorField(f.grid, vals, support)


def gradient_stack(grid: DiskGrid, values: np.ndarray) -> CovectorField:
    """Gradient of multi-channel node values (n, n, C) -> CovectorField."""
    vals, support = _gradient_values(grid, values)
    return CovectorField(grid, vals, support)


def _divergence_values(grid: DiskGrid, values: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Exact negative adjoint of the centered gradient, per channel.

    Covector values outside ``support`` count as zero, which is what makes
    the summation-by-parts identity hold to rounding for every field pair.
    """
    h = grid.h
    fx = np.where(support[:, :, None], values[:, :, :, 0], 0.0)
    fy = np.where(support[:, :, None], values[:, :, :, 1], 0.0)
    out = np.zeros(values.shape[:3])
    out[:-1, :] += fx[1:, :]
    out[1:, :] -= fx[:-1, :]
    out[:, :-1] += fy[:, 1:]
    out[:, 1:] -= fy[:, :-1]
    out /= 2.0 * h
    out[~grid.nonexterior] = 0.0
    return out


def divergence(F: CovectorField) -> ScalarField:
    """Adjoint divergence of a single-channel covector field."""
    if F.channel_count != 1:
        raise GridMismatchError("divergence expects a single-channel covector field")
    vals = _divergence_values(F.grid, F.values, F.support)
    return ScalarField(F.grid, vals[:, :, 0])


def divergence_channels(F: CovectorField) -> np.ndarray:
    """Per-channel adjoint divergence, returned as an (n, n, C) array."""
    return _divergence_values(F.grid, F.values, F.support)


def curl_channels(F: CovectorField) -> np.ndarray:
    """Per-channel scalar curl d1 F2 - d2 F1 (centered, zero-padded adjoint style).

    Uses the same zero-extension convention as ``divergence`` so the Hodge
    complex identities close exactly.
    """
    grid = F.grid
    h = grid.h
    fx = np.where(F.support[:, :, None], F.values[:, :, :, 0], 0.0)
    fy = np.where(F.support[:, :, None], F.values[:, :, :, 1], 0.0)
    out = np.zeros(F.values.shape[:3])
    out[:-1, :] += fy[1:, :]
    out[1:, :] -= fy[:-1, :]
    out[:, :-1] -= fx[:, 1:]
    out[:, 1:] += fx[:, :-1]
    out /= 2.0 * h
    out[~grid.nonexterior] = 0.0
    return out


def laplacian(f: ScalarField) -> ScalarField:
    """Compact 5-point Laplacian on interior nodes (zero elsewhere)."""
    grid = f.grid
    v = f.values
    out = np.zeros_like(v)
    sl = slice(1, -1)
    out[sl, sl] = (
        v[2:, sl] + v[:-2, sl] + v[sl, 2:] + v[sl, :-2] - 4.0 * v[sl, sl]
    ) / grid.h**2
    out[~grid.interior] = 0.0
    return ScalarField(grid, out)


def ball_norm(F, center, r: float, p) -> float:
    """Discrete L^p norm over the nodes inside B(center, r).

    h^2-weighted sum for finite p, max for p = inf; covector fields use the
    Euclidean length over channels and components at each node. The ball must
    be contained in the unit disk.
    """
    if isinstance(F, CovectorField):
        grid = F.grid
        mask = grid.ball_mask(center, r) & F.support
        mag = F.pointwise_norm()[mask]
    elif isinstance(F, ScalarField):
        grid = F.grid
        mask = grid.ball_mask(center, r) & grid.nonexterior
        mag = np.abs(F.values[mask])
    else:
        raise TypeError(f"ball_norm expects a field, got {type(F).__name__}")
    if p != np.inf and (not np.isscalar(p) or p < 1):
        raise DomainError(f"L^p exponent must satisfy p >= 1 or be inf, got {p}")
    if mag.size == 0:
        return 0.0
    if p == np.inf:
        return float(mag.max())
    return float((np.sum(mag ** float(p)) * grid.h**2) ** (1.0 / float(p)))


def integrate(grid: DiskGrid, values: np.ndarray, mask: np.ndarray) -> float:
    """h^2-weighted sum of ``values`` over ``mask`` in fixed index order."""
    return float(np.sum(values[mask]) * grid.h**2)


def class_names(node_class: np.ndarray) -> np.ndarray:
    """Map the integer node classification to its string labels."""
    out = np.empty(node_class.shape, dtype=object)
    for code, name in _CLASS_NAMES.items():
        out[node_class == code] = name
    return out
