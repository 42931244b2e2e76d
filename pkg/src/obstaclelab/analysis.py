"""Numerical shadows of the regularity machinery.

Everything here is a read-only diagnostic over field snapshots: Hodge
splitting of a planar flux on a ball, decay-rate fits of ball-restricted
norms, the div-curl (Wente) inequality ratio, the viscosity sandwich
0 <= lap(lambda) <= Lambda, Frehse-style difference-quotient energies for
mu = lambda - 1, deterministic Hoelder seminorms, and free-boundary
extraction by marching squares.

The continuum arguments pass through mollification; discretely the grid
Laplacian plus refinement limits stand in for that step, so every contract
here is refinement-asymptotic rather than exact, except where the discrete
complex closes identically (Hodge reconstruction and the harmonicity of the
remainder, which hold to solver precision by construction).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh, poisson
from .errors import DomainError, GridMismatchError
from .fields import ObstacleField, SphereField, weight_field
from .mesh import CovectorField, DiskGrid, ScalarField, ball_norm


# ---------------------------------------------------------------------------
# Hodge decomposition


@dataclass
class HodgeParts:
    """Flux split F = grad a + rot grad b + H on a ball, channel by channel."""

    ball: tuple[tuple[float, float], float]
    a: tuple[ScalarField, ...]
    b: tuple[ScalarField, ...]
    H: CovectorField
    check_mask: np.ndarray
    reconstruction_error: float
    div_curl_error: float


def _wide_composite(grid: DiskGrid) -> sp.csc_matrix:
    """The exact matrix of divergence(gradient(.)) on non-exterior scalars."""
    cached = grid._cache.get("wide_composite")
    if cached is not None:
        return cached
    g, _ = poisson.centered_gradient_matrix(grid)
    comp = (g.T @ g).tocsc()
    grid._cache["wide_composite"] = comp
    return comp


def _perp(values: np.ndarray) -> np.ndarray:
    """Rotate 2-vector channels: (p, q) -> (-q, p)."""
    out = np.empty_like(values)
    out[..., 0] = -values[..., 1]
    out[..., 1] = values[..., 0]
    return out


def hodge_decompose(F: CovectorField, ball) -> HodgeParts:
    """Split F into gradient, rotated-gradient and harmonic parts on a ball.

    a and b solve the zero-boundary Poisson problems driven by div F and
    curl F with the composite operator divergence(gradient(.)), so the
    remainder H := F - grad a - perp grad b is discretely divergence- and
    curl-free at every ball node whose stencil avoids zero padding (the
    ``check_mask``). Reconstruction is exact by construction.
    """
    grid = F.grid
    (cx, cy), r = ball
    smask = grid.ball_mask((cx, cy), r) & grid.nonexterior
    if not smask.any():
        raise DomainError("ball contains no grid nodes")

    comp = _wide_composite(grid)
    _, idx_s = poisson.centered_gradient_matrix(grid)
    sel = idx_s[smask]
    a_mat = comp[sel][:, sel].tocsc()
    lu = spla.splu(a_mat)

    div_f = mesh.divergence_channels(F)
    curl_f = mesh.curl_channels(F)
    nchan = F.channel_count
    a_fields = []
    b_fields = []
    grads = np.zeros_like(F.values)
    perps = np.zeros_like(F.values)
    for c in range(nchan):
        sol_a = lu.solve(-div_f[:, :, c][smask])
        poisson.check_residual(a_mat, sol_a, -div_f[:, :, c][smask], what="Hodge a-solve")
        sol_b = lu.solve(-curl_f[:, :, c][smask])
        poisson.check_residual(a_mat, sol_b, -curl_f[:, :, c][smask], what="Hodge b-solve")
        av = np.zeros((grid.n, grid.n))
        bv = np.zeros((grid.n, grid.n))
        av[smask] = sol_a
        bv[smask] = sol_b
        a_fields.append(ScalarField(grid, av))
        b_fields.append(ScalarField(grid, bv))
        ga = mesh.gradient(a_fields[-1])
        gb = mesh.gradient(b_fields[-1])
        grads[:, :, c, :] = ga.values[:, :, 0, :]
        perps[:, :, c, :] = _perp(gb.values[:, :, 0, :])

    support = F.support & grid.interior & smask
    h_vals = np.where(support[:, :, None, None], F.values - grads - perps, 0.0)
    h_field = CovectorField(grid, h_vals, support)

    recon = F.values - grads - perps - h_field.values
    recon_err = float(np.abs(recon[support]).max(initial=0.0))

    check_mask = grid.shrink(support)
    div_h = mesh.divergence_channels(h_field)
    curl_h = mesh.curl_channels(h_field)
    dc = 0.0
    if check_mask.any():
        dc = max(
            float(np.abs(div_h[check_mask]).max(initial=0.0)),
            float(np.abs(curl_h[check_mask]).max(initial=0.0)),
        )
    return HodgeParts(
        ball=((float(cx), float(cy)), float(r)),
        a=tuple(a_fields),
        b=tuple(b_fields),
        H=h_field,
        check_mask=check_mask,
        reconstruction_error=recon_err,
        div_curl_error=dc,
    )


# ---------------------------------------------------------------------------
# Decay fits


@dataclass
class DecayFit:
    center: tuple[float, float]
    radii: tuple[float, ...]
    p: float
    norms: tuple[float, ...]
    fitted_slope: float
    r2_of_fit: float
    degenerate: bool = False

    @property
    def alpha_est(self) -> float:
        return self.p * self.fitted_slope

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radii": list(self.radii),
            "p": self.p,
            "norms": list(self.norms),
            "fitted_slope": self.fitted_slope,
            "r2_of_fit": self.r2_of_fit,
            "alpha_est": self.alpha_est,
            "degenerate": self.degenerate,
        }


def _loglog_fit(radii, norms, center, p) -> DecayFit:
    radii = np.asarray(radii, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if len(radii) < 2 or np.any(np.diff(radii) <= 0):
        raise DomainError("need at least two strictly increasing radii")
    scale = norms.max(initial=0.0)
    if scale <= 1e-13:
        return DecayFit(tuple(center), tuple(radii), p, tuple(norms), float("nan"),
                        float("nan"), degenerate=True)
    keep = norms > 1e-13 * scale
    lx = np.log(radii[keep])
    ly = np.log(norms[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(tuple(center), tuple(radii), p, tuple(norms), float(slope), r2)


def default_radii(r_outer: float, count: int = 6) -> np.ndarray:
    """Geometric radii spanning one decade up to r_outer."""
    return np.geomspace(r_outer / 10.0, r_outer, count)


def harmonic_decay_check(H: CovectorField, ball, p: float, radii=None) -> DecayFit:
    """Log-log slope of r -> ||H||_{L^p(B(r))} about the ball center.

    Harmonic inputs obey slope >= 2/p (equality when H does not vanish at the
    center); an all-zero H is flagged degenerate rather than raising.
    """
    (cx, cy), r_outer = ball
    if radii is None:
        radii = default_radii(0.95 * r_outer)
    norms = [ball_norm(H, (cx, cy), float(r), p) for r in radii]
    return _loglog_fit(radii, norms, (cx, cy), p)


def morrey_fit(F: CovectorField, centers, radii, p: float) -> list[DecayFit]:
    """Per-center decay fit of ball-restricted L^p norms; alpha_est = p * slope."""
    out = []
    for c in centers:
        norms = [ball_norm(F, c, float(r), p) for r in radii]
        out.append(_loglog_fit(radii, norms, tuple(map(float, c)), p))
    return out


# ---------------------------------------------------------------------------
# Wente ratio


def wente_check(a: ScalarField, b: ScalarField, ball) -> float:
    """(||w||_inf + ||grad w||_2) / (||grad a||_2 ||grad b||_2) for lap w = grad a . perp grad b.

    w has zero boundary values on the discrete ball. The continuum inequality
    bounds the ratio by 1; discretization adds O(h).
    """
    grid = a.grid
    if grid != b.grid:
        raise GridMismatchError("a and b live on different grids")
    (cx, cy), r = ball
    smask = grid.ball_mask((cx, cy), r) & grid.nonexterior
    ga = mesh.gradient(a)
    gb = mesh.gradient(b)
    na = ball_norm(ga, (cx, cy), r, 2)
    nb = ball_norm(gb, (cx, cy), r, 2)
    if na * nb < 1e-14:
        raise DomainError("Wente ratio undefined: a or b has vanishing gradient energy")
    rhs = (
        ga.values[:, :, 0, 0] * (-gb.values[:, :, 0, 1])
        + ga.values[:, :, 0, 1] * gb.values[:, :, 0, 0]
    )
    w = poisson.solve_dirichlet(grid, smask, np.zeros_like(rhs), source=-rhs)
    w_inf = float(np.abs(w[smask]).max(initial=0.0))
    gw = mesh.gradient(ScalarField(grid, w))
    w_grad = ball_norm(gw, (cx, cy), r, 2)
    return (w_inf + w_grad) / (na * nb)


# ---------------------------------------------------------------------------
# Viscosity sandwich


@dataclass
class ViscosityReport:
    min_discrete_laplacian: float
    max_discrete_laplacian: float
    lambda_bound: float
    off_contact_eq_residual: float

    def to_dict(self) -> dict:
        return {
            "min_discrete_laplacian": self.min_discrete_laplacian,
            "max_discrete_laplacian": self.max_discrete_laplacian,
            "lambda_bound": self.lambda_bound,
            "off_contact_eq_residual": self.off_contact_eq_residual,
        }


def viscosity_report(
    lam: ObstacleField,
    v: SphereField,
    contact_tol: float,
    *,
    margin: float = 0.0,
    weight: ScalarField | None = None,
) -> ViscosityReport:
    """Sandwich diagnostics 0 <= lap(lambda) <= Lambda and the off-contact equation.

    Lambda is the node-wise max of lambda * weight (weight defaults to the
    centered |grad v|^2); the equation residual |lap lambda - lambda weight|
    is maximized over {lambda > 1 + contact_tol} (0 by convention when that
    set is empty). ``weight`` lets a caller pass the exact weight a solver
    used, making the off-contact equation an identity to solver precision;
    ``margin`` trims the staircase ring for refinement studies.
    """
    grid = lam.grid
    lap = mesh.laplacian(lam.as_scalar()).values
    inter = grid.interior
    g = weight if weight is not None else weight_field(lam, v)
    lam_g = lam.values * g.values
    lam_bound = float(lam_g[inter].max(initial=0.0))
    off = inter & (lam.values > 1.0 + contact_tol)
    if margin > 0.0:
        off = off & (grid.x**2 + grid.y**2 < (1.0 - margin) ** 2)
    resid = float(np.abs(lap[off] - lam_g[off]).max(initial=0.0)) if off.any() else 0.0
    return ViscosityReport(
        min_discrete_laplacian=float(lap[inter].min(initial=0.0)),
        max_discrete_laplacian=float(lap[inter].max(initial=0.0)),
        lambda_bound=lam_bound,
        off_contact_eq_residual=resid,
    )


# ---------------------------------------------------------------------------
# Difference quotients


def difference_quotient_energy(
    mu: ScalarField, eta: ScalarField, h_steps, direction: int
) -> list[float]:
    """||grad delta_{i;kh}(eta mu)||_{L^2} for each integer step multiple k.

    eta must vanish wherever a requested shift would leave the non-exterior
    node set (DomainError otherwise). Bounded values over k are the discrete
    second-order-regularity signal; growth like (kh)^{-1/2} flags a gradient
    jump.
    """
    grid = mu.grid
    if grid != eta.grid:
        raise GridMismatchError("mu and eta live on different grids")
    if direction not in (0, 1):
        raise DomainError("direction must be 0 (x) or 1 (y)")
    w = mu.values * eta.values
    supp = grid.nonexterior & (eta.values != 0.0)
    out = []
    n = grid.n
    for k in h_steps:
        k = int(k)
        if k == 0:
            raise DomainError("step multiples must be nonzero")
        shifted_ok = np.zeros((n, n), dtype=bool)
        src = np.zeros((n, n))
        if direction == 0:
            if abs(k) >= n:
                raise DomainError(f"shift {k} exits the lattice")
            if k > 0:
                shifted_ok[:-k, :] = grid.nonexterior[k:, :]
                src[:-k, :] = w[k:, :]
            else:
                shifted_ok[-k:, :] = grid.nonexterior[:k, :]
                src[-k:, :] = w[:k, :]
        else:
            if abs(k) >= n:
                raise DomainError(f"shift {k} exits the lattice")
            if k > 0:
                shifted_ok[:, :-k] = grid.nonexterior[:, k:]
                src[:, :-k] = w[:, k:]
            else:
                shifted_ok[:, -k:] = grid.nonexterior[:, :k]
                src[:, -k:] = w[:, :k]
        bad = supp & ~shifted_ok
        if bad.any():
            raise DomainError(
                f"shift by {k} steps leaves the domain on {int(bad.sum())} cutoff nodes"
            )
        quot = (src - w) / (k * grid.h)
        quot[~grid.nonexterior] = 0.0
        gq = mesh.gradient(ScalarField(grid, quot))
        dens = np.einsum("ijck,ijck->ij", gq.values, gq.values)
        out.append(float(np.sqrt(mesh.integrate(grid, dens, gq.support))))
    return out


# ---------------------------------------------------------------------------
# Hoelder seminorm


def holder_seminorm(F, alpha: float, sample_budget: int = 400) -> float:
    """max over strided node pairs of |F(x) - F(y)| / |x - y|^alpha.

    Sampling is a fixed stride over the support in lexicographic order, never
    random, so repeated calls agree bit for bit.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    if isinstance(F, CovectorField):
        grid = F.grid
        mask = F.support
        vals = F.values.reshape(grid.n, grid.n, -1)
    elif isinstance(F, ScalarField):
        grid = F.grid
        mask = grid.nonexterior
        vals = F.values[:, :, None]
    else:
        raise TypeError(f"holder_seminorm expects a field, got {type(F).__name__}")
    ii, jj = np.nonzero(mask)
    if ii.size < 2:
        return 0.0
    stride = max(1, ii.size // max(int(sample_budget), 2))
    sel = slice(0, None, stride)
    pts = np.stack([grid.xs[ii[sel]], grid.xs[jj[sel]]], axis=1)
    fv = vals[ii[sel], jj[sel]]
    diff = fv[:, None, :] - fv[None, :, :]
    num = np.sqrt(np.sum(diff * diff, axis=2))
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2))
    np.fill_diagonal(dist, np.inf)
    return float(np.max(num / dist**alpha))


# ---------------------------------------------------------------------------
# Free boundary extraction

_SEG_TABLE = {
    1: (((3,), (0,)),),
    2: (((0,), (1,)),),
    3: (((3,), (1,)),),
    4: (((1,), (2,)),),
    6: (((0,), (2,)),),
    7: (((3,), (2,)),),
    8: (((2,), (3,)),),
    9: (((2,), (0,)),),
    11: (((2,), (1,)),),
    12: (((1,), (3,)),),
    13: (((1,), (0,)),),
    14: (((0,), (3,)),),
}


def _edge_point(grid, i, j, edge, level, vals):
    # corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1); edges run 0..3 CCW from bottom
    corner_of_edge = {0: ((i, j), (i + 1, j)), 1: ((i + 1, j), (i + 1, j + 1)),
                      2: ((i + 1, j + 1), (i, j + 1)), 3: ((i, j + 1), (i, j))}
    (ia, ja), (ib, jb) = corner_of_edge[edge]
    fa, fb = vals[ia, ja], vals[ib, jb]
    t = 0.5 if fb == fa else (level - fa) / (fb - fa)
    t = min(max(t, 0.0), 1.0)
    xa, ya = grid.xs[ia], grid.xs[ja]
    xb, yb = grid.xs[ib], grid.xs[jb]
    return (xa + t * (xb - xa), ya + t * (yb - ya))


def free_boundary(lam: ObstacleField, contact_tol: float) -> list[np.ndarray]:
    """Marching-squares polylines of the level set {lambda = 1 + contact_tol}.

    Cells need all four corners non-exterior; saddle cells are disambiguated
    by the cell-center average. Segments are chained into closed or
    boundary-terminated polylines; an empty list is a legitimate answer.
    """
    grid = lam.grid
    vals = lam.values
    level = 1.0 + contact_tol
    cell_ok = (
        grid.nonexterior[:-1, :-1]
        & grid.nonexterior[1:, :-1]
        & grid.nonexterior[1:, 1:]
        & grid.nonexterior[:-1, 1:]
    )
    segments = []
    above = vals >= level
    codes = (
        above[:-1, :-1].astype(np.int8)
        | above[1:, :-1].astype(np.int8) << 1
        | above[1:, 1:].astype(np.int8) << 2
        | above[:-1, 1:].astype(np.int8) << 3
    )
    crossed = cell_ok & (codes != 0) & (codes != 15)
    ci, cj = np.nonzero(crossed)
    for i, j in zip(ci, cj):
        code = int(codes[i, j])
        if code in (5, 10):
            center = 0.25 * (vals[i, j] + vals[i + 1, j] + vals[i + 1, j + 1] + vals[i, j + 1])
            if code == 5:
                pairs = (((3,), (0,)), ((1,), (2,))) if center < level else (
                    ((3,), (2,)), ((1,), (0,)))
            else:
                pairs = (((0,), (1,)), ((2,), (3,))) if center < level else (
                    ((0,), (3,)), ((2,), (1,)))
        else:
            pairs = _SEG_TABLE[code]
        for (ea,), (eb,) in pairs:
            pa = _edge_point(grid, i, j, ea, level, vals)
            pb = _edge_point(grid, i, j, eb, level, vals)
            if pa != pb:
                segments.append((pa, pb))

    if not segments:
        return []

    def key(pt):
        return (round(pt[0] / grid.h * 1e6), round(pt[1] / grid.h * 1e6))

    adj: dict = {}
    for s_id, (pa, pb) in enumerate(segments):
        adj.setdefault(key(pa), []).append((s_id, 0))
        adj.setdefault(key(pb), []).append((s_id, 1))

    used = [False] * len(segments)
    polylines = []

    def walk(start_seg, start_end):
        pts = []
        seg, end = start_seg, start_end
        pts.append(segments[seg][end])
        while True:
            used[seg] = True
            nxt_pt = segments[seg][1 - end]
            pts.append(nxt_pt)
            candidates = [
                (s, e) for (s, e) in adj.get(key(nxt_pt), []) if not used[s]
            ]
            if not candidates:
                return pts
            seg, end = candidates[0]

    endpoints = [k for k, lst in adj.items() if len(lst) == 1]
    for k in sorted(endpoints):
        s_id, end = adj[k][0]
        if not used[s_id]:
            polylines.append(np.array(walk(s_id, end)))
    for s_id in range(len(segments)):
        if not used[s_id]:
            polylines.append(np.array(walk(s_id, 0)))
    return polylines


def polyline_circularity(poly: np.ndarray) -> float:
    """4 pi A / P^2 of a closed polyline (1.0 for a circle)."""
    x, y = poly[:, 0], poly[:, 1]
    if not (np.isclose(x[0], x[-1]) and np.isclose(y[0], y[-1])):
        x = np.append(x, x[0])
        y = np.append(y, y[0])
    area = 0.5 * abs(float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])))
    per = float(np.sum(np.hypot(np.diff(x), np.diff(y))))
    if per == 0.0:
        return 0.0
    return 4.0 * np.pi * area / per**2
