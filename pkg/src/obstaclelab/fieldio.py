"""Field serialization, run manifests and checkpoints.

CSV field format (documented contract):
    header  x,y,class,value            (one channel)
            x,y,class,value0,...,valueK (K+1 channels)
    one row per non-exterior node in lexicographic (i, j) order, floats
    rendered with %.17g (lossless round-trip). A JSON sidecar at
    ``<name>.csv.json`` records {"n": ..., "h": ..., "channels": ...}.

The run manifest (manifest.json) lists every artifact file with byte size and
sha256; it is written last and contains no timestamps, so identical runs
produce bit-identical artifact directories.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .alternation import CriticalPoint, JointConfig
from .errors import DomainError
from .fields import ObstacleField, SphereField
from .mesh import BOUNDARY, INTERIOR, DiskGrid, build_disk_grid
from .obstacle import ObstacleSolveConfig
from .sphere import SphereSolveConfig

CHECKPOINT_VERSION = 1

_CLASS_LABEL = {INTERIOR: "interior", BOUNDARY: "boundary"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field_csv(path, grid: DiskGrid, values: np.ndarray) -> None:
    """Write node values ((n,n) or (n,n,C)) in the documented CSV format."""
    path = Path(path)
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    channels = vals.shape[2]
    if channels == 1:
        header = "x,y,class,value"
    else:
        header = "x,y,class," + ",".join(f"value{c}" for c in range(channels))
    ii, jj = np.nonzero(grid.nonexterior)
    lines = [header]
    for i, j in zip(ii, jj):
        row = [
            _fmt(grid.xs[i]),
            _fmt(grid.xs[j]),
            _CLASS_LABEL[int(grid.node_class[i, j])],
        ]
        row.extend(_fmt(vals[i, j, c]) for c in range(channels))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {"n": grid.n, "h": grid.h, "channels": channels}
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_field_csv(path) -> tuple[DiskGrid, np.ndarray]:
    """Read a field CSV plus sidecar; returns (grid, values (n,n,C))."""
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    grid = build_disk_grid(int(sidecar["n"]))
    channels = int(sidecar["channels"])
    values = np.zeros((grid.n, grid.n, channels))
    text = path.read_text(encoding="utf-8").strip().split("\n")
    header = text[0].split(",")
    if header[:3] != ["x", "y", "class"]:
        raise DomainError(f"unrecognized field CSV header in {path}")
    inv_h = 1.0 / grid.h
    seen = 0
    for line in text[1:]:
        parts = line.split(",")
        x, y = float(parts[0]), float(parts[1])
        i = int(round((x + 1.0) * inv_h))
        j = int(round((y + 1.0) * inv_h))
        for c in range(channels):
            values[i, j, c] = float(parts[3 + c])
        seen += 1
    if seen != int(grid.nonexterior.sum()):
        raise DomainError(f"{path} has {seen} rows, expected {int(grid.nonexterior.sum())}")
    return grid, values


def save_rows_csv(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(out_dir, command: str, status: str) -> Path:
    """List every file in the run directory (sorted) with size and sha256."""
    out_dir = Path(out_dir)
    entries = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            entries.append(
                {
                    "path": str(p.relative_to(out_dir)),
                    "bytes": p.stat().st_size,
                    "sha256": file_sha256(p),
                }
            )
    manifest = {
        "format_version": 1,
        "command": command,
        "status": status,
        "artifacts": entries,
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path


def load_manifest(out_dir) -> dict:
    return json.loads((Path(out_dir) / "manifest.json").read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Checkpoints


def _config_to_dict(cfg: JointConfig) -> dict:
    out = dataclasses.asdict(cfg)
    return out


def _config_from_dict(d: dict) -> JointConfig:
    d = dict(d)
    d["obstacle"] = ObstacleSolveConfig(**d["obstacle"])
    d["sphere"] = SphereSolveConfig(**d["sphere"])
    return JointConfig(**d)


def save_checkpoint(out_dir, cp: CriticalPoint) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = cp.grid
    save_field_csv(out_dir / "lambda.csv", grid, cp.lam.values)
    if cp.v is not None:
        save_field_csv(out_dir / "v.csv", grid, cp.v.values)
    save_field_csv(out_dir / "boundary_u.csv", grid, cp.boundary_u)
    write_json(
        out_dir / "trace.json",
        {
            "checkpoint_version": CHECKPOINT_VERSION,
            "energy_trace": list(map(float, cp.energy_trace)),
            "outer_iters": cp.outer_iters,
            "converged": cp.converged,
            "joint_report": cp.joint_report,
            "config": _config_to_dict(cp.config),
        },
    )


def load_checkpoint(out_dir) -> CriticalPoint:
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / "trace.json").read_text(encoding="utf-8"))
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise DomainError(
            f"checkpoint version {meta.get('checkpoint_version')} unsupported "
            f"(expected {CHECKPOINT_VERSION}); resuming across formats is not allowed"
        )
    grid, lam_vals = load_field_csv(out_dir / "lambda.csv")
    _, bu = load_field_csv(out_dir / "boundary_u.csv")
    v = None
    if (out_dir / "v.csv").exists():
        grid2, v_vals = load_field_csv(out_dir / "v.csv")
        if grid2.n != grid.n:
            raise DomainError("checkpoint fields disagree on resolution; no implicit interpolation")
        v = SphereField(grid, v_vals)
    return CriticalPoint(
        lam=ObstacleField(grid, lam_vals[:, :, 0]),
        v=v,
        energy_trace=list(meta["energy_trace"]),
        joint_report=meta["joint_report"],
        boundary_u=bu,
        config=_config_from_dict(meta["config"]),
        outer_iters=int(meta["outer_iters"]),
        converged=bool(meta["converged"]),
    )
