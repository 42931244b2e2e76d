import hashlib
import json
from pathlib import Path

import matplotlib.image as mpimg
import numpy as np
import pytest

from obstacle_figures import FigureError, FigureSpec, render
from obstacle_figures.__main__ import main as cli_main


def _dir_hashes(path: Path) -> dict:
    out = {}
    for p in sorted(path.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(path))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_uniform_lambda_heatmap_is_single_color(uniform_run, tmp_path):
    out = tmp_path / "lam.png"
    meta = render(FigureSpec(str(uniform_run), "lambda_heatmap", str(out)))
    assert out.exists()
    lo, hi = meta["value_range"]
    assert hi - lo <= 1e-9
    img = mpimg.imread(out)
    ny, nx = img.shape[:2]
    # a central crop sits inside the disk: constant field, one color
    crop = img[int(0.45 * ny) : int(0.55 * ny), int(0.35 * nx) : int(0.45 * nx)]
    flat = crop.reshape(-1, crop.shape[-1])
    assert np.unique(flat, axis=0).shape[0] == 1


def test_uniform_run_draws_no_contour(uniform_run, tmp_path):
    meta = render(FigureSpec(str(uniform_run), "lambda_heatmap", str(tmp_path / "o.png")))
    assert meta["overlay_drawn"] is False
    assert meta["curve_count"] == 0


def test_decay_annotation_reads_back_json_slope(cap_run, tmp_path):
    meta = render(FigureSpec(str(cap_run), "decay", str(tmp_path / "decay.png")))
    fits = json.loads((cap_run / "decay.json").read_text())["fits"]
    assert len(meta["annotations"]) == len(fits) > 0
    for ann, fit in zip(meta["annotations"], fits):
        assert ann["slope_text"] == f"slope={fit['fitted_slope']:.3f}"
        assert round(ann["fitted_slope"], 3) == round(fit["fitted_slope"], 3)


def test_rendering_never_mutates_artifacts(cap_run, tmp_path):
    before = _dir_hashes(cap_run)
    for kind in ("lambda_heatmap", "gradient_map", "convergence", "decay"):
        render(FigureSpec(str(cap_run), kind, str(tmp_path / f"{kind}.png")))
    assert _dir_hashes(cap_run) == before


def test_all_kinds_produce_images(cap_run, tmp_path):
    for kind in ("lambda_heatmap", "gradient_map", "convergence", "decay"):
        out = tmp_path / f"{kind}.png"
        render(FigureSpec(str(cap_run), kind, str(out)))
        assert out.stat().st_size > 0


def test_unknown_kind_rejected(cap_run, tmp_path):
    with pytest.raises(FigureError):
        render(FigureSpec(str(cap_run), "hologram", str(tmp_path / "x.png")))


def test_missing_artifact_rejected(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(FigureError):
        render(FigureSpec(str(empty), "lambda_heatmap", str(tmp_path / "x.png")))


def test_unlisted_file_rejected(cap_run, tmp_path):
    # copy the run but drop lambda.csv from the manifest: the renderer must
    # refuse to touch files outside the manifest
    import shutil

    clone = tmp_path / "clone"
    shutil.copytree(cap_run, clone)
    manifest = json.loads((clone / "manifest.json").read_text())
    manifest["artifacts"] = [
        e for e in manifest["artifacts"] if e["path"] != "lambda.csv"
    ]
    (clone / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FigureError, match="not listed"):
        render(FigureSpec(str(clone), "lambda_heatmap", str(tmp_path / "x.png")))


def test_refuses_to_write_into_artifact_dir(cap_run):
    with pytest.raises(FigureError, match="refusing"):
        render(FigureSpec(str(cap_run), "lambda_heatmap", str(cap_run / "fig.png")))


def test_script_entry_point(cap_run, tmp_path, capsys):
    out = tmp_path / "cli.png"
    assert cli_main([str(cap_run), "decay", str(out)]) == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["kind"] == "decay"
    assert out.exists()
    missing = tmp_path / "nowhere"
    assert cli_main([str(missing), "decay", str(tmp_path / "y.png")]) == 1
    assert cli_main([str(cap_run), "bogus", str(tmp_path / "z.png")]) == 2
