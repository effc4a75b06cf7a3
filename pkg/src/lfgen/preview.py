"""Contact sheets and EPI images built from a written dataset."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from lfgen import codecs
from lfgen.dataset import atomic_write, read_manifest
from lfgen.errors import DatasetIOError, MissingDataError


def _scene_entry(manifest, scene_id):
    for s in manifest.scenes:
        if s["scene_id"] == scene_id:
            return s
    raise MissingDataError(f"scene {scene_id} is not in the manifest")


def load_views(root, scene_id) -> tuple[dict, np.ndarray]:
    """All RGB views of one scene as uint8, shape (nv, nu, H, W, 3)."""
    root = Path(root)
    try:
        manifest = read_manifest(root)
    except DatasetIOError as e:
        raise MissingDataError(str(e)) from e
    entry = _scene_entry(manifest, scene_id)
    rig = manifest.config.rig
    grid = np.zeros((rig.nv, rig.nu, rig.height, rig.width, 3), dtype=np.uint8)
    for v in entry["views"]:
        path = root / entry["dir"] / v["rgb"]
        if not path.is_file():
            raise MissingDataError(f"{path} is missing")
        grid[v["v"], v["u"]] = codecs.read_image(path.read_bytes())
    return entry, grid


def montage(grid: np.ndarray) -> np.ndarray:
    """Tile views with u left to right and v top to bottom."""
    nv, nu, H, W, C = grid.shape
    return grid.transpose(0, 2, 1, 3, 4).reshape(nv * H, nu * W, C)


def center_epi(grid: np.ndarray) -> np.ndarray:
    """EPI of the middle camera row through the middle image row, shape (nu, W, 3)."""
    nv, nu, H, W, _ = grid.shape
    return grid[nv // 2, :, H // 2, :, :].copy()


def write_preview(root, scene_id: int, out_dir=None) -> tuple[Path, Path]:
    root = Path(root)
    out_dir = root if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, grid = load_views(root, scene_id)
    sheet = out_dir / f"preview_scene_{scene_id}.png"
    epi = out_dir / f"epi_scene_{scene_id}.png"
    atomic_write(sheet, codecs.encode_uint8_png(montage(grid)))
    atomic_write(epi, codecs.encode_uint8_png(center_epi(grid)))
    return sheet, epi
