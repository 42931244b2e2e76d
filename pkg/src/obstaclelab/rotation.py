"""Special-orthogonal-valued direction solver at fixed lambda.

The rotation field P minimizes the same edge-quadrature energy as the sphere
solver with the Frobenius norm in place of the Euclidean one. Variations are
multiplicative, P -> P expm(tau * A) with A antisymmetric, so orthogonality is
preserved to rounding throughout; stationarity is the vanishing of
antisym(P^T div(lambda^2 grad P)), the projection of the Euler-Lagrange
operator onto the admissible directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import mesh, poisson
from .errors import DomainError, GridMismatchError, NonConvergenceError
from .fields import ObstacleField
from .mesh import CovectorField, DiskGrid
from .sphere import _edge_energy, _edge_weights, _weighted_operator

ORTHO_TOL = 1e-10


@dataclass
class RotationSolveConfig:
    max_iters: int = 400
    tol: float = 1e-7
    step: float | None = None
    backtracking: float = 0.5
    preconditioned: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.backtracking < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")


class RotationField:
    """An N x N special-orthogonal matrix per non-exterior node."""

    def __init__(self, grid: DiskGrid, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 4 or values.shape[:2] != (grid.n, grid.n) or (
            values.shape[2] != values.shape[3]
        ):
            raise GridMismatchError(
                f"rotation values shape {values.shape} incompatible with grid n={grid.n}"
            )
        defect = orthogonality_defect(grid, values)
        if defect > ORTHO_TOL:
            raise DomainError(f"matrices deviate from orthogonality by {defect:.3e}")
        dets = np.linalg.det(values[grid.nonexterior])
        if dets.size and dets.min() <= 0.0:
            raise DomainError("rotation field contains reflections (det <= 0)")
        vals = values.copy()
        vals[~grid.nonexterior] = 0.0
        self.grid = grid
        self.values = vals
        self.values.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @classmethod
    def constant(cls, grid: DiskGrid, q: np.ndarray) -> "RotationField":
        q = np.asarray(q, dtype=np.float64)
        return cls(grid, np.broadcast_to(q, (grid.n, grid.n) + q.shape).copy())

    @classmethod
    def from_angle(cls, grid: DiskGrid, theta: np.ndarray) -> "RotationField":
        """SO(2) field from a node-wise angle array."""
        c, s = np.cos(theta), np.sin(theta)
        vals = np.zeros((grid.n, grid.n, 2, 2))
        vals[:, :, 0, 0] = c
        vals[:, :, 0, 1] = -s
        vals[:, :, 1, 0] = s
        vals[:, :, 1, 1] = c
        return cls(grid, vals)


def orthogonality_defect(grid: DiskGrid, values: np.ndarray) -> float:
    """max node-wise infinity-norm of P^T P - I over non-exterior nodes."""
    p = values[grid.nonexterior]
    if p.size == 0:
        return 0.0
    gram = np.einsum("mki,mkj->mij", p, p)
    gram -= np.eye(values.shape[2])
    return float(np.abs(gram).max())


def expm_antisym(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack (m, N, N) of antisymmetric matrices.

    Closed forms for N = 2 and N = 3 (Rodrigues); scaling-and-squaring on the
    truncated series otherwise. Exact orthogonality to rounding either way.
    """
    n_dim = a.shape[-1]
    if n_dim == 2:
        th = a[:, 1, 0]
        c, s = np.cos(th), np.sin(th)
        out = np.empty_like(a)
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        return out
    if n_dim == 3:
        w = np.stack([a[:, 2, 1], a[:, 0, 2], a[:, 1, 0]], axis=1)
        th = np.linalg.norm(w, axis=1)
        th_safe = np.where(th > 1e-30, th, 1.0)
        k1 = np.where(th > 1e-8, np.sin(th_safe) / th_safe, 1.0 - th**2 / 6.0)
        k2 = np.where(
            th > 1e-8, (1.0 - np.cos(th_safe)) / th_safe**2, 0.5 - th**2 / 24.0
        )
        a2 = a @ a
        return np.eye(3) + k1[:, None, None] * a + k2[:, None, None] * a2
    scale = np.abs(a).max(initial=0.0)
    k = max(0, int(np.ceil(np.log2(max(scale, 1e-300)))) + 2)
    x = a / 2.0**k
    term = np.broadcast_to(np.eye(n_dim), a.shape).copy()
    out = term.copy()
    for p in range(1, 14):
        term = term @ x / p
        out += term
    for _ in range(k):
        out = out @ out
    return out


def _antisym_part(s: np.ndarray) -> np.ndarray:
    return 0.5 * (s - np.swapaxes(s, -1, -2))


def _stack(values4: np.ndarray) -> np.ndarray:
    n0, n1, nd, _ = values4.shape
    return values4.reshape(n0, n1, nd * nd)


def _unstack(values3: np.ndarray, nd: int) -> np.ndarray:
    n0, n1, _ = values3.shape
    return values3.reshape(n0, n1, nd, nd)


def rotation_gradient(p: RotationField) -> CovectorField:
    """Centered gradient of the matrix field, entries as N^2 channels."""
    return mesh.gradient_stack(p.grid, _stack(p.values))


def solve_rotation(
    lam: ObstacleField,
    boundary,
    init: RotationField | None = None,
    cfg: RotationSolveConfig | None = None,
) -> RotationField:
    """Descend the weighted rotation energy by multiplicative tangent steps.

    Returns the converged RotationField with ``.history`` (iteration, energy,
    residual) and ``.orthogonality_drift`` (max defect seen across all
    iterations) attached.
    """
    cfg = cfg or RotationSolveConfig()
    grid = lam.grid
    bvals = boundary.values if isinstance(boundary, RotationField) else np.asarray(boundary)
    if bvals.ndim != 4 or bvals.shape[:2] != (grid.n, grid.n):
        raise GridMismatchError("boundary data must be an (n, n, N, N) array")
    bfield = boundary if isinstance(boundary, RotationField) else RotationField(grid, bvals)
    nd = bfield.dim

    if init is None:
        ext = np.zeros((grid.n, grid.n, nd * nd))
        flat_b = np.where(grid.boundary[:, :, None], _stack(bfield.values), 0.0)
        for c in range(nd * nd):
            ext[:, :, c] = poisson.solve_dirichlet(grid, grid.interior, flat_b[:, :, c])
        p = _unstack(ext, nd)
        inter = grid.interior
        u, _, vt = np.linalg.svd(p[inter])
        det_fix = np.sign(np.linalg.det(u @ vt))
        u[:, :, -1] *= det_fix[:, None]
        p[inter] = u @ vt
        p[grid.boundary] = bfield.values[grid.boundary]
        p[~grid.nonexterior] = 0.0
    else:
        if init.grid != grid or init.dim != nd:
            raise GridMismatchError("init field incompatible with boundary data")
        p = init.values.copy()
        p[grid.boundary] = bfield.values[grid.boundary]

    wx, wy = _edge_weights(grid, lam.values)
    h2 = grid.h**2
    a_mat, idx, ii, jj = poisson.weighted_system(grid, wx, wy, grid.interior)
    solver = spla.splu(a_mat) if cfg.preconditioned else None

    flat = _stack(p)
    tau = cfg.step if cfg.step is not None else (1.0 if cfg.preconditioned else h2 / 8.0)
    tau_max = tau * 8.0
    energy = _edge_energy(grid, wx, wy, flat)
    history = [(0, energy, np.inf)]
    drift = orthogonality_defect(grid, p)
    inter = grid.interior

    for it in range(1, cfg.max_iters + 1):
        lp = _unstack(_weighted_operator(grid, wx, wy, _stack(p)), nd)
        s = np.einsum("ijak,ijal->ijkl", p, lp)
        anti = _antisym_part(s)
        res = float(np.sqrt(np.einsum("ijkl,ijkl->ij", anti, anti)[inter]).max(initial=0.0))
        history[-1] = (history[-1][0], history[-1][1], res)
        if res <= cfg.tol:
            out = RotationField(grid, p)
            out.history = history
            out.orthogonality_drift = drift
            return out

        if solver is not None:
            # precondition the projected (tangent) residual P*anti; the raw
            # residual preconditions to harmonic_extension - P, whose P^T
            # product is symmetric at a polar-projected field and the
            # direction would vanish identically
            tangent = _stack(np.einsum("ijab,ijbl->ijal", p, anti))
            d = np.zeros_like(tangent)
            for c in range(nd * nd):
                d[ii, jj, c] = solver.solve(tangent[ii, jj, c])
            a_dir = _antisym_part(np.einsum("ijak,ijal->ijkl", p, _unstack(d, nd)))
        else:
            a_dir = anti / np.where(grid.nonexterior, lam.values, 1.0)[:, :, None, None] ** 2
        a_dir[~inter] = 0.0
        slope = -2.0 * h2 * float(np.einsum("ijkl,ijkl->", anti, a_dir))
        if slope >= 0.0:
            a_dir = anti.copy()
            a_dir[~inter] = 0.0
            slope = -2.0 * h2 * float(np.einsum("ijkl,ijkl->", anti, a_dir))
            if slope >= 0.0:
                raise NonConvergenceError(
                    f"rotation direction lost descent at iteration {it}", history=history
                )

        # same rounding-floor slack as the sphere solver
        slack = 32.0 * np.finfo(float).eps * (1.0 + abs(energy))
        accepted = False
        t = min(tau * 2.0, tau_max)
        if cfg.preconditioned and 0.1 * t * abs(slope) < slack:
            t = min(t, 1.0)
        while t > 1e-14 * tau_max:
            step = np.broadcast_to(np.eye(nd), p.shape).copy()
            step[inter] = expm_antisym(t * a_dir[inter])
            trial = p.copy()
            trial[inter] = p[inter] @ step[inter]
            e_try = _edge_energy(grid, wx, wy, _stack(trial))
            if e_try <= energy + 0.1 * t * slope + slack:
                accepted = True
                break
            t *= cfg.backtracking
        if not accepted:
            raise NonConvergenceError(
                f"rotation backtracking stalled at iteration {it} (residual {res:.3e})",
                history=history,
            )
        p, energy, tau = trial, e_try, t
        drift = max(drift, orthogonality_defect(grid, p))
        history.append((it, energy, res))

    raise NonConvergenceError(
        f"rotation solve above tolerance after {cfg.max_iters} iterations "
        f"(residual {history[-1][2]:.3e})",
        history=history,
    )


def maurer_cartan_form(p: RotationField) -> CovectorField:
    """P^T grad P as an N^2-channel covector field on the gradient support."""
    grad = rotation_gradient(p)
    gv = _unstack_grad(grad.values, p.dim)
    s = np.einsum("ijak,ijalc->ijklc", p.values, gv)
    n0, n1 = p.values.shape[:2]
    vals = s.reshape(n0, n1, p.dim * p.dim, 2)
    return CovectorField(p.grid, vals, grad.support)


def _unstack_grad(values: np.ndarray, nd: int) -> np.ndarray:
    n0, n1, _, two = values.shape
    return values.reshape(n0, n1, nd, nd, two)


def symmetry_defect(p: RotationField) -> float:
    """max node-wise Frobenius norm of sym(P^T grad P); O(h) for smooth fields."""
    form = maurer_cartan_form(p)
    s = _unstack_grad(form.values, p.dim)
    sym = 0.5 * (s + np.swapaxes(s, 2, 3))
    mag = np.sqrt(np.einsum("ijklc,ijklc->ij", sym, sym))
    return float(mag[form.support].max(initial=0.0))


def rotation_conservation_residual(
    lam: ObstacleField, p: RotationField, margin: float = 0.1
) -> float:
    """max over matrix entries of the interior L^2 norm of div(lambda^2 P^T grad P).

    Measured on the same margin-trimmed interior region as the sphere-map
    residuals (the staircase ring does not refine away).
    """
    if lam.grid != p.grid:
        raise GridMismatchError("lambda and P live on different grids")
    grid = p.grid
    form = maurer_cartan_form(p)
    flux = CovectorField(grid, lam.values[:, :, None, None] ** 2 * form.values, form.support)
    div = mesh.divergence_channels(flux)
    clean = grid.shrink(flux.support)
    if margin > 0.0:
        clean = clean & (grid.x**2 + grid.y**2 < (1.0 - margin) ** 2)
    h2 = grid.h**2
    worst = 0.0
    for c in range(div.shape[2]):
        worst = max(worst, float(np.sqrt(np.sum(div[clean, c] ** 2) * h2)))
    return worst


def hs_dirichlet_energy(lam: ObstacleField, p: RotationField) -> float:
    """Dirichlet energy of the assembled conformal map lambda * P (Hilbert-Schmidt)."""
    u = lam.values[:, :, None] * _stack(p.values)
    grad = mesh.gradient_stack(p.grid, u)
    dens = np.einsum("ijck,ijck->ij", grad.values, grad.values)
    return mesh.integrate(p.grid, dens, grad.support)


def rotation_split_energy(lam: ObstacleField, p: RotationField) -> tuple[float, float]:
    """(sum |grad lambda|^2 h^2, sum lambda^2 |grad P|^2 h^2) over the interior."""
    gl = mesh.gradient(lam.as_scalar())
    e_lam = mesh.integrate(
        lam.grid, np.einsum("ijck,ijck->ij", gl.values, gl.values), gl.support
    )
    grad = rotation_gradient(p)
    dens = lam.values**2 * np.einsum("ijck,ijck->ij", grad.values, grad.values)
    e_p = mesh.integrate(p.grid, dens, grad.support)
    return e_lam, e_p
