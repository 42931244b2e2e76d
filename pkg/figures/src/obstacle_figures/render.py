"""Render static figures from an artifact directory.

This package reads only the exported CSV/JSON files and checks every file it
touches against the run manifest; it never imports the solver package and
never writes into the artifact directory, so re-rendering cannot change any
artifact hash.

Figure kinds:
    lambda_heatmap  scalar factor over the disk, free-boundary overlay when
                    free_boundary.csv carries curves
    gradient_map    |grad v| over the disk
    convergence     energy trace and residual history on log scale
    decay           log-log ball-norm decay per center with fitted-slope
                    annotations (read back from decay.json, never refitted)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("lambda_heatmap", "gradient_map", "convergence", "decay")


class FigureError(RuntimeError):
    """Missing/corrupt artifact, unlisted file, or unknown figure kind."""


@dataclass
class FigureSpec:
    artifact_dir: str
    kind: str
    out_path: str
    options: dict = field(default_factory=dict)


def _load_manifest(artifact_dir: Path) -> set[str]:
    path = artifact_dir / "manifest.json"
    if not path.exists():
        raise FigureError(f"no manifest.json in {artifact_dir}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        return {entry["path"] for entry in manifest["artifacts"]}
    except (ValueError, KeyError, TypeError) as err:
        raise FigureError(f"corrupt manifest in {artifact_dir}: {err}") from err


def _artifact(artifact_dir: Path, listed: set[str], name: str) -> Path:
    if name not in listed:
        raise FigureError(f"{name} is not listed in the run manifest")
    path = artifact_dir / name
    if not path.exists():
        raise FigureError(f"artifact {name} listed but missing on disk")
    return path


def _read_field_csv(artifact_dir: Path, listed: set[str], name: str):
    """Dense (n, n, C) array plus node mask from the documented CSV format."""
    path = _artifact(artifact_dir, listed, name)
    sidecar_path = _artifact(artifact_dir, listed, name + ".json")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    n, h, channels = int(sidecar["n"]), float(sidecar["h"]), int(sidecar["channels"])
    values = np.full((n, n, channels), np.nan)
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    if not lines or not lines[0].startswith("x,y,class"):
        raise FigureError(f"unrecognized field CSV header in {name}")
    for line in lines[1:]:
        parts = line.split(",")
        i = int(round((float(parts[0]) + 1.0) / h))
        j = int(round((float(parts[1]) + 1.0) / h))
        for c in range(channels):
            values[i, j, c] = float(parts[3 + c])
    mask = ~np.isnan(values[:, :, 0])
    return values, mask, n, h


def _read_rows_csv(artifact_dir: Path, listed: set[str], name: str, expect_header: str):
    path = _artifact(artifact_dir, listed, name)
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    if lines[0] != expect_header:
        raise FigureError(f"{name}: expected header {expect_header!r}, got {lines[0]!r}")
    rows = []
    for line in lines[1:]:
        if line:
            rows.append([float(x) for x in line.split(",")])
    return rows


def _disk_axes(ax, values, mask, n):
    masked = np.ma.masked_where(~mask, values)
    lo, hi = float(masked.min()), float(masked.max())
    kwargs = {}
    if hi - lo <= 1e-9 * max(1.0, abs(hi)):
        # constant field: pin the color window so rounding noise is not
        # stretched across the whole colormap
        kwargs = {"vmin": lo - 0.5, "vmax": hi + 0.5}
    extent = (-1.0, 1.0, -1.0, 1.0)
    image = ax.imshow(
        masked.T, origin="lower", extent=extent, interpolation="nearest",
        cmap="viridis", **kwargs,
    )
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return image


def _render_lambda_heatmap(spec: FigureSpec, artifact_dir: Path, listed: set[str]) -> dict:
    values, mask, n, h = _read_field_csv(artifact_dir, listed, "lambda.csv")
    fig, ax = plt.subplots(figsize=(6, 5))
    image = _disk_axes(ax, values[:, :, 0], mask, n)
    fig.colorbar(image, ax=ax, label="lambda")
    overlay_drawn = False
    curve_count = 0
    if "free_boundary.csv" in listed:
        rows = _read_rows_csv(artifact_dir, listed, "free_boundary.csv", "curve_id,x,y")
        if rows:
            ids = sorted({int(r[0]) for r in rows})
            for cid in ids:
                pts = np.array([[r[1], r[2]] for r in rows if int(r[0]) == cid])
                ax.plot(pts[:, 0], pts[:, 1], color="crimson", linewidth=1.6)
            overlay_drawn = True
            curve_count = len(ids)
    ax.set_title("scalar factor" + (" with free boundary" if overlay_drawn else ""))
    fig.savefig(spec.out_path, dpi=spec.options.get("dpi", 130))
    plt.close(fig)
    inside = values[:, :, 0][mask]
    return {
        "kind": spec.kind,
        "overlay_drawn": overlay_drawn,
        "curve_count": curve_count,
        "value_range": [float(inside.min()), float(inside.max())],
    }


def _render_gradient_map(spec: FigureSpec, artifact_dir: Path, listed: set[str]) -> dict:
    values, mask, n, h = _read_field_csv(artifact_dir, listed, "grad_v_norm.csv")
    fig, ax = plt.subplots(figsize=(6, 5))
    image = _disk_axes(ax, values[:, :, 0], mask, n)
    fig.colorbar(image, ax=ax, label="|grad v|")
    ax.set_title("direction-field gradient magnitude")
    fig.savefig(spec.out_path, dpi=spec.options.get("dpi", 130))
    plt.close(fig)
    inside = values[:, :, 0][mask]
    return {"kind": spec.kind, "value_range": [float(inside.min()), float(inside.max())]}


def _render_convergence(spec: FigureSpec, artifact_dir: Path, listed: set[str]) -> dict:
    trace_path = _artifact(artifact_dir, listed, "trace.json")
    trace = json.loads(trace_path.read_text(encoding="utf-8"))
    energy = trace.get("energy_trace", [])
    rows = _read_rows_csv(
        artifact_dir, listed, "residual_history.csv", "iter,energy,residual"
    )
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(range(1, len(energy) + 1), energy, marker="o", markersize=3)
    ax1.set_xlabel("half-step")
    ax1.set_ylabel("joint energy")
    ax1.set_title("outer energy trace")
    if rows:
        iters = [r[0] for r in rows]
        residuals = [max(r[2], 1e-300) for r in rows]
        finite = [r for r in residuals if np.isfinite(r)]
        ax2.semilogy(iters[: len(finite)], finite, marker=".")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("tangential residual")
    ax2.set_title("direction-solve history")
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=spec.options.get("dpi", 130))
    plt.close(fig)
    return {
        "kind": spec.kind,
        "energy_points": len(energy),
        "history_points": len(rows),
    }


def _render_decay(spec: FigureSpec, artifact_dir: Path, listed: set[str]) -> dict:
    decay_path = _artifact(artifact_dir, listed, "decay.json")
    fits = json.loads(decay_path.read_text(encoding="utf-8"))["fits"]
    rows = _read_rows_csv(artifact_dir, listed, "decay_norms.csv", "center_id,radius,norm")
    fig, ax = plt.subplots(figsize=(6.5, 5))
    annotations = []
    for cid, fit in enumerate(fits):
        pts = np.array([[r[1], r[2]] for r in rows if int(r[0]) == cid])
        label_center = f"({fit['center'][0]:g}, {fit['center'][1]:g})"
        if fit.get("degenerate"):
            slope_text = "degenerate"
        else:
            # annotation value read straight from the JSON fit, never refitted
            slope_text = f"slope={fit['fitted_slope']:.3f}"
        if pts.size:
            keep = pts[:, 1] > 0
            ax.loglog(pts[keep, 0], pts[keep, 1], marker="o", markersize=3,
                      label=f"center {label_center}: {slope_text}")
        annotations.append(
            {
                "center": fit["center"],
                "slope_text": slope_text,
                "fitted_slope": fit.get("fitted_slope"),
                "alpha_est": fit.get("alpha_est"),
            }
        )
    ax.set_xlabel("ball radius r")
    ax.set_ylabel("||grad v||_Lp(B(r))")
    ax.set_title(f"ball-norm decay (p={fits[0]['p']:g})" if fits else "ball-norm decay")
    ax.legend(fontsize=8)
    fig.savefig(spec.out_path, dpi=spec.options.get("dpi", 130))
    plt.close(fig)
    return {"kind": spec.kind, "annotations": annotations}


_RENDERERS = {
    "lambda_heatmap": _render_lambda_heatmap,
    "gradient_map": _render_gradient_map,
    "convergence": _render_convergence,
    "decay": _render_decay,
}


def render(spec: FigureSpec) -> dict:
    """Write the figure and return its metadata (annotations, ranges, counts)."""
    if spec.kind not in _RENDERERS:
        raise FigureError(f"unknown figure kind {spec.kind!r}; known: {', '.join(KINDS)}")
    artifact_dir = Path(spec.artifact_dir)
    listed = _load_manifest(artifact_dir)
    out_parent = Path(spec.out_path).resolve().parent
    if out_parent == artifact_dir.resolve():
        raise FigureError("refusing to write the image into the artifact directory")
    out_parent.mkdir(parents=True, exist_ok=True)
    return _RENDERERS[spec.kind](spec, artifact_dir, listed)
