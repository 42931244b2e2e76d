"""Batch entry point: scenario runs, verification and diagnostic exports.

Exit codes: 0 all contracts of the invoked modules passed; 1 a solver failed
to converge (partial artifacts and a report are still written); 2 usage,
unknown command/scenario or config parse error.

Every artifact directory contains a config.txt echo of the input and a
manifest.json hashing all files; identical configs produce bit-identical
artifacts. The OBSTACLE_OUT environment variable overrides the configured
output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, fieldio
from .alternation import solve_critical
from .config import ConfigError, RunConfig, read_config
from .errors import DomainError, NonConvergenceError
from .fields import ObstacleField, assemble_u, map_gradient
from .mesh import build_disk_grid
from .obstacle import (
    contact_radius,
    default_contact_tol,
    kkt_report,
    solve_obstacle,
    subharmonicity_margin,
)
from .rotation import rotation_conservation_residual, solve_rotation, RotationSolveConfig
from .scenarios import (
    build_boundary_u,
    build_obstacle_data,
    build_rotation_boundary,
    get_scenario,
    wente_pair,
)
from .sphere import edge_weight_field, tangential_residual

COMMANDS = ("solve", "verify", "decay", "hodge", "wente", "so-solve", "export")


def _out_dir(cfg: RunConfig) -> Path:
    out = os.environ.get("OBSTACLE_OUT", cfg.out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(out: Path, config_path: str) -> None:
    (out / "config.txt").write_bytes(Path(config_path).read_bytes())


def _write_critical_artifacts(out: Path, cp, grid) -> None:
    fieldio.save_checkpoint(out, cp)
    if cp.v is not None:
        u = assemble_u(cp.lam, cp.v)
        fieldio.save_field_csv(out / "u.csv", grid, u.values)
        grad = map_gradient(cp.v)
        fieldio.save_field_csv(out / "grad_v_norm.csv", grid, grad.pointwise_norm())
        fieldio.save_rows_csv(
            out / "residual_history.csv",
            "iter,energy,residual",
            [(it, float(e), float(r)) for it, e, r in getattr(cp.v, "history", [])],
        )
        g = edge_weight_field(cp.v)
        fieldio.write_json(out / "kkt.json", cp.joint_report.get("kkt", {}))
        fieldio.write_json(out / "el.json", cp.joint_report.get("el", {}))
        vr = analysis.viscosity_report(
            cp.lam, cp.v, default_contact_tol(grid), weight=g
        )
        fieldio.write_json(out / "viscosity.json", vr.to_dict())
        curves = analysis.free_boundary(cp.lam, default_contact_tol(grid))
        rows = []
        for cid, poly in enumerate(curves):
            rows.extend((cid, float(x), float(y)) for x, y in poly)
        fieldio.save_rows_csv(out / "free_boundary.csv", "curve_id,x,y", rows)


def _cmd_solve(cfg: RunConfig, out: Path) -> int:
    scn = get_scenario(cfg.scenario)
    grid = build_disk_grid(cfg.n)
    if scn.kind == "obstacle":
        g, boundary = build_obstacle_data(scn, grid, cfg.params)
        try:
            lam = solve_obstacle(g, boundary, cfg.obstacle_config())
            status = "converged"
        except NonConvergenceError as err:
            if err.partial is None:
                raise
            lam = ObstacleField(grid, err.partial)
            status = "non_converged"
        fieldio.save_field_csv(out / "lambda.csv", grid, lam.values)
        fieldio.save_field_csv(out / "g.csv", grid, g.values)
        report = kkt_report(lam, g, default_contact_tol(grid))
        fieldio.write_json(
            out / "obstacle_report.json",
            {
                "kkt": report.to_dict(),
                "subharmonicity_margin": subharmonicity_margin(lam),
                "contact_radius": contact_radius(lam),
                "status": status,
            },
        )
        fieldio.write_manifest(out, "solve", status)
        return 0 if status == "converged" else 1
    if scn.kind == "critical":
        dim = 2 if scn.name.startswith("harmonic_angle") else cfg.dim
        boundary_u = build_boundary_u(scn, grid, cfg.params, dim)
        try:
            cp = solve_critical(grid, boundary_u, cfg.joint_config())
            status = "converged"
        except NonConvergenceError as err:
            if err.partial is None:
                raise
            cp = err.partial
            status = "non_converged"
            fieldio.write_json(
                out / "non_convergence.json",
                {"message": str(err), "context": err.context or {}},
            )
        _write_critical_artifacts(out, cp, grid)
        fieldio.write_manifest(out, "solve", status)
        return 0 if status == "converged" else 1
    raise DomainError(f"scenario kind {scn.kind!r} is not driven by `solve` (use so-solve)")


def _cmd_so_solve(cfg: RunConfig, out: Path) -> int:
    scn = get_scenario(cfg.scenario)
    if scn.kind != "rotation":
        raise DomainError(f"scenario {scn.name!r} is not a rotation scenario")
    grid = build_disk_grid(cfg.n)
    boundary = build_rotation_boundary(scn, grid, cfg.params, cfg.seed)
    lam = ObstacleField.constant(grid, max(1.0, float(cfg.params.get("lambda_b", 1.0))))
    rot_cfg = RotationSolveConfig(max_iters=cfg.sphere_max_iters, tol=cfg.sphere_tol)
    try:
        p = solve_rotation(lam, boundary, cfg=rot_cfg)
        status = "converged"
    except NonConvergenceError as err:
        fieldio.write_json(
            out / "non_convergence.json", {"message": str(err), "context": err.context or {}}
        )
        fieldio.write_manifest(out, "so-solve", "non_converged")
        return 1
    nd = p.dim
    fieldio.save_field_csv(out / "p.csv", grid, p.values.reshape(grid.n, grid.n, nd * nd))
    fieldio.save_rows_csv(
        out / "residual_history.csv",
        "iter,energy,residual",
        [(it, float(e), float(r)) for it, e, r in p.history],
    )
    fieldio.write_json(
        out / "rotation_report.json",
        {
            "conservation_residual": rotation_conservation_residual(lam, p),
            "orthogonality_drift": p.orthogonality_drift,
            "final_energy": p.history[-1][1],
            "final_residual": p.history[-1][2],
            "dim": nd,
        },
    )
    fieldio.write_manifest(out, "so-solve", status)
    return 0


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    checks = {}
    if (out / "trace.json").exists():
        cp = fieldio.load_checkpoint(out)
        grid = cp.grid
        g = edge_weight_field(cp.v)
        kkt = kkt_report(cp.lam, g, default_contact_tol(grid))
        rep = cp.joint_report
        el_tol = rep.get("el_tol", 6.0 * grid.h)
        from .sphere import el_residuals

        r_direct, r_antisym, r_cons = el_residuals(cp.lam, cp.v)
        vr = analysis.viscosity_report(cp.lam, cp.v, default_contact_tol(grid), weight=g)
        u_min = float(
            np.linalg.norm(assemble_u(cp.lam, cp.v).values, axis=2)[grid.nonexterior].min()
        )
        tol = cp.config.joint_tol
        checks = {
            "complementarity": {"value": kkt.max_complementarity, "threshold": tol},
            "tangential_residual": {
                "value": tangential_residual(cp.lam, cp.v),
                "threshold": tol,
            },
            "r_direct": {"value": r_direct, "threshold": el_tol},
            "r_antisym": {"value": r_antisym, "threshold": el_tol},
            "r_conservation": {"value": r_cons, "threshold": el_tol},
            "admissibility": {"value": 1.0 - u_min, "threshold": 1e-9},
            "laplacian_lower": {"value": -vr.min_discrete_laplacian, "threshold": 1e-4},
            "laplacian_upper": {
                "value": vr.max_discrete_laplacian - vr.lambda_bound,
                "threshold": 1e-4,
            },
        }
    elif (out / "obstacle_report.json").exists():
        grid, lam_vals = fieldio.load_field_csv(out / "lambda.csv")
        _, g_vals = fieldio.load_field_csv(out / "g.csv")
        from .mesh import ScalarField

        lam = ObstacleField(grid, lam_vals[:, :, 0])
        g = ScalarField(grid, g_vals[:, :, 0])
        kkt = kkt_report(lam, g, default_contact_tol(grid))
        checks = {
            "complementarity": {"value": kkt.max_complementarity, "threshold": cfg.obstacle_tol * 10},
            "negativity": {"value": kkt.max_negativity, "threshold": 1e-12},
            "subharmonicity": {"value": -subharmonicity_margin(lam), "threshold": 1e-6},
        }
    else:
        raise DomainError(f"no checkpoint found in {out}")
    for entry in checks.values():
        entry["pass"] = bool(entry["value"] <= entry["threshold"])
    all_pass = all(entry["pass"] for entry in checks.values())
    fieldio.write_json(out / "verify.json", {"checks": checks, "all_pass": all_pass})
    fieldio.write_manifest(out, "verify", "pass" if all_pass else "fail")
    return 0 if all_pass else 1


def _cmd_decay(cfg: RunConfig, out: Path) -> int:
    cp = fieldio.load_checkpoint(out)
    grad = map_gradient(cp.v)
    p_exp = float(cfg.params.get("decay_p", 2.0))
    r_outer = float(cfg.params.get("decay_r", 0.45))
    centers = [(0.0, 0.0), (0.25, 0.0), (0.0, -0.3)]
    radii = analysis.default_radii(r_outer)
    fits = analysis.morrey_fit(grad, centers, radii, p_exp)
    fieldio.write_json(out / "decay.json", {"fits": [f.to_dict() for f in fits]})
    rows = []
    for cid, fit in enumerate(fits):
        rows.extend((cid, float(r), float(nm)) for r, nm in zip(fit.radii, fit.norms))
    fieldio.save_rows_csv(out / "decay_norms.csv", "center_id,radius,norm", rows)
    fieldio.write_manifest(out, "decay", "ok")
    return 0


def _cmd_hodge(cfg: RunConfig, out: Path) -> int:
    cp = fieldio.load_checkpoint(out)
    grid = cp.grid
    grad = map_gradient(cp.v)
    from .mesh import CovectorField

    flux = CovectorField(grid, cp.lam.values[:, :, None, None] ** 2 * grad.values, grad.support)
    ball = ((0.0, 0.0), float(cfg.params.get("hodge_r", 0.55)))
    parts = analysis.hodge_decompose(flux, ball)
    slopes = {}
    for p_exp in (2.0, 4.0):
        fit = analysis.harmonic_decay_check(parts.H, ball, p_exp)
        slopes[str(int(p_exp))] = fit.to_dict()
    payload = {
        "reconstruction_error": parts.reconstruction_error,
        "div_curl_error": parts.div_curl_error,
        "harmonic_decay": slopes,
    }
    fieldio.write_json(out / "hodge.json", payload)
    ok = parts.reconstruction_error <= 1e-8
    fieldio.write_manifest(out, "hodge", "ok" if ok else "fail")
    return 0 if ok else 1


def _cmd_wente(cfg: RunConfig, out: Path) -> int:
    grid = build_disk_grid(cfg.n)
    ball = ((0.0, 0.0), float(cfg.params.get("wente_r", 0.8)))
    ratios = []
    for k in range(20):
        a, b = wente_pair(grid, k, cfg.seed)
        ratios.append(analysis.wente_check(a, b, ball))
    a0, _ = wente_pair(grid, 0, cfg.seed)
    equal_case = analysis.wente_check(a0, a0, ball)
    payload = {
        "ratios": ratios,
        "max_ratio": max(ratios),
        "equal_case_ratio": equal_case,
    }
    fieldio.write_json(out / "wente.json", payload)
    ok = max(ratios) <= 1.05 and equal_case <= 1e-10
    fieldio.write_manifest(out, "wente", "ok" if ok else "fail")
    return 0 if ok else 1


def _cmd_export(cfg: RunConfig, out: Path) -> int:
    cp = fieldio.load_checkpoint(out)
    u = assemble_u(cp.lam, cp.v)
    fieldio.save_field_csv(out / "u.csv", cp.grid, u.values)
    fieldio.write_manifest(out, "export", "ok")
    return 0


_DISPATCH = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "decay": _cmd_decay,
    "hodge": _cmd_hodge,
    "wente": _cmd_wente,
    "so-solve": _cmd_so_solve,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obstaclelab",
        description="Constrained-map laboratory on the unit disk: solve, verify, diagnose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("config", help="flat key=value config file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        cfg = read_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = _out_dir(cfg)
    _echo_config(out, args.config)
    try:
        return _DISPATCH[args.command](cfg, out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NonConvergenceError as err:
        fieldio.write_json(
            out / "non_convergence.json",
            {"message": str(err), "context": getattr(err, "context", None) or {}},
        )
        fieldio.write_manifest(out, args.command, "non_converged")
        print(f"non-convergence: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
