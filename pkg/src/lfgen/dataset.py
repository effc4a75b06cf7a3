"""The generation loop, on-disk layout, manifest, validation and benchmarking.

Layout::

    {output_dir}/manifest.json
    {output_dir}/scene_{id:05}/rgb_u{u:02}_v{v:02}.{png|ppm}
    {output_dir}/scene_{id:05}/depth_u{u:02}_v{v:02}.{pfm|png}
    {output_dir}/scene_{id:05}/disparity_ref.pfm

``disparity_ref.pfm`` is the ground-truth disparity of the grid-center
camera, computed from that camera's depth exactly as stored on disk.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lfgen import __version__, codecs
from lfgen.config import RunConfig, from_dict, to_dict, with_updates
from lfgen.errors import ConfigError, DatasetIOError
from lfgen.lightfield import capture_lightfield
from lfgen.rig import CameraPose, build_rig, depth_to_disparity
from lfgen.scene import SEED_DERIVATION, scene_to_dict, spawn_scene

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA = 1
DISPARITY_NAME = "disparity_ref.pfm"
DISPARITY_TOLERANCE = 1e-4


def scene_dir_name(scene_id: int) -> str:
    return f"scene_{scene_id:05d}"


def view_names(cfg: RunConfig, u: int, v: int) -> tuple[str, str]:
    return f"rgb_u{u:02d}_v{v:02d}.{cfg.image_ext}", f"depth_u{u:02d}_v{v:02d}.{cfg.depth_ext}"


def atomic_write(path: Path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as e:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise DatasetIOError(path, e.strerror or str(e)) from e


def encode_rgb(cfg: RunConfig, rgb: np.ndarray) -> bytes:
    if cfg.image_format == "png8":
        return codecs.write_image_png8(rgb)
    return codecs.write_image_ppm(rgb)


def encode_depth(cfg: RunConfig, depth: np.ndarray) -> bytes:
    if cfg.depth_format == "pfm32":
        return codecs.write_depth_pfm(depth)
    return codecs.write_depth_png16(depth, cfg.depth_png16_scale)


def decode_depth(cfg: RunConfig, data: bytes) -> np.ndarray:
    if cfg.depth_format == "pfm32":
        return codecs.read_pfm(data).astype(np.float64)
    return codecs.read_depth_png16(data, cfg.depth_png16_scale)


def stored_disparity(cfg: RunConfig, depth_bytes: bytes) -> np.ndarray:
    """Reference-camera disparity as float32, derived from the stored depth encoding."""
    depth = decode_depth(cfg, depth_bytes)
    return depth_to_disparity(depth, cfg.rig.f_px, cfg.rig.baseline_u).astype(np.float32)


def _pose_record(pose: CameraPose) -> dict:
    return {
        "position": list(pose.position),
        "orientation": [list(row) for row in pose.orientation],
        "intrinsics": {"f_px": pose.f_px, "cx": pose.cx, "cy": pose.cy, "width": pose.width, "height": pose.height},
    }


def _produce_scene(cfg: RunConfig, poses: list[CameraPose], scene_id: int, out: Path) -> tuple[dict, float]:
    """Render, encode and write one scene; returns its manifest entry and wall time."""
    t0 = time.perf_counter()
    scene = spawn_scene(cfg.seed, scene_id, cfg.gen)
    lf = capture_lightfield(scene, cfg.rig, cfg.render)
    sdir = out / scene_dir_name(scene_id)
    try:
        sdir.mkdir(exist_ok=True)
    except OSError as e:
        raise DatasetIOError(sdir, e.strerror or str(e)) from e

    ref_u, ref_v = cfg.rig.reference_index
    views = []
    disparity = None
    for pose, frame in zip(poses, lf.views):
        rgb_name, depth_name = view_names(cfg, pose.u_index, pose.v_index)
        atomic_write(sdir / rgb_name, encode_rgb(cfg, frame.rgb))
        depth_bytes = encode_depth(cfg, frame.depth)
        atomic_write(sdir / depth_name, depth_bytes)
        if (pose.u_index, pose.v_index) == (ref_u, ref_v):
            disparity = stored_disparity(cfg, depth_bytes)
        views.append({"u": pose.u_index, "v": pose.v_index, "rgb": rgb_name, "depth": depth_name, **_pose_record(pose)})
    atomic_write(sdir / DISPARITY_NAME, codecs.write_depth_pfm(disparity))

    entry = {
        "scene_id": scene_id,
        "dir": sdir.name,
        "seed": cfg.seed,
        "seed_derivation": SEED_DERIVATION,
        "object_count": len(scene.objects),
        "reference_view": {"u": ref_u, "v": ref_v},
        "disparity_ref": DISPARITY_NAME,
        "views": views,
        "scene": scene_to_dict(scene),
    }
    return entry, time.perf_counter() - t0


def _produce_scene_job(args):
    cfg, poses, scene_id, out = args
    return _produce_scene(cfg, poses, scene_id, Path(out))


def _is_ours(p: Path) -> bool:
    return p.name == MANIFEST_NAME or (p.is_dir() and p.name.startswith("scene_"))


def prepare_output_dir(out: Path, overwrite: bool = False) -> None:
    """Create ``out`` and prove it is writable, before any rendering happens."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetIOError(out, f"cannot create output directory: {e.strerror or e}") from e
    if not out.is_dir():
        raise DatasetIOError(out, "output path is not a directory")
    existing = list(out.iterdir())
    if existing and not overwrite:
        raise DatasetIOError(out, "output directory is not empty (use --force to overwrite)")
    probe = out / ".lfgen_write_probe"
    try:
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise DatasetIOError(out, f"output directory is not writable: {e.strerror or e}") from e
    for p in existing:
        if _is_ours(p):
            shutil.rmtree(p) if p.is_dir() else p.unlink()


def generate_dataset(cfg: RunConfig, overwrite: bool = False, progress=None) -> "DatasetManifest":
    """Spawn, render and write ``cfg.num_scenes`` scenes, then the manifest.

    ``progress(done, total)`` is called after each scene. The manifest is
    only written once every file is on disk.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    prepare_output_dir(out, overwrite=overwrite)
    poses = build_rig(cfg.rig)

    entries: list[dict] = []
    per_scene: list[float] = []
    t0 = time.perf_counter()
    ids = range(cfg.num_scenes)
    if cfg.workers > 1 and cfg.num_scenes > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = pool.map(_produce_scene_job, [(cfg, poses, i, str(out)) for i in ids])
            for entry, secs in results:
                entries.append(entry)
                per_scene.append(secs)
                if progress:
                    progress(len(entries), cfg.num_scenes)
    else:
        for i in ids:
            entry, secs = _produce_scene(cfg, poses, i, out)
            entries.append(entry)
            per_scene.append(secs)
            if progress:
                progress(len(entries), cfg.num_scenes)
    total = time.perf_counter() - t0

    doc = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": __version__,
        "config": to_dict(cfg),
        "scenes": entries,
        "timing": {"total_seconds": total, "per_scene_seconds": per_scene},
    }
    atomic_write(out / MANIFEST_NAME, manifest_bytes(doc))
    log.info("wrote %d scenes to %s in %.2fs", cfg.num_scenes, out, total)
    return DatasetManifest.from_doc(doc)


def manifest_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


@dataclass
class DatasetManifest:
    tool_version: str
    config: RunConfig
    scenes: list[dict]
    timing: dict
    doc: dict = field(repr=False)

    @classmethod
    def from_doc(cls, doc: dict) -> "DatasetManifest":
        return cls(doc["tool_version"], from_dict(doc["config"]), doc["scenes"], doc["timing"], doc)

    def files(self) -> list[str]:
        """Every data file path, relative to the dataset root."""
        out = []
        for s in self.scenes:
            for v in s["views"]:
                out += [f"{s['dir']}/{v['rgb']}", f"{s['dir']}/{v['depth']}"]
            out.append(f"{s['dir']}/{s['disparity_ref']}")
        return out


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DatasetIOError(path, e.strerror or str(e)) from e
    except json.JSONDecodeError as e:
        raise DatasetIOError(path, f"manifest is not valid JSON: {e}") from e
    try:
        return DatasetManifest.from_doc(doc)
    except KeyError as e:
        raise DatasetIOError(path, f"manifest lacks {e.args[0]!r}") from e


# --- validation ---


@dataclass(frozen=True)
class Failure:
    kind: str  # missing-file, extra-file, dimension-mismatch, invalid-depth, disparity-mismatch, manifest
    path: str
    detail: str

    def __str__(self):
        return f"[{self.kind}] {self.path}: {self.detail}"


@dataclass
class ValidationReport:
    root: str
    failures: list[Failure] = field(default_factory=list)
    checked_files: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [f"{self.root}: {self.checked_files} files checked, {len(self.failures)} failure(s)"]
        lines += [f"  {f}" for f in self.failures]
        return "\n".join(lines)


def validate_dataset(root) -> ValidationReport:
    """Cross-check a dataset directory against its manifest."""
    root = Path(root)
    report = ValidationReport(str(root))
    fail = report.failures.append
    try:
        manifest = read_manifest(root)
    except (DatasetIOError, ConfigError) as e:
        fail(Failure("manifest", str(root / MANIFEST_NAME), str(e)))
        return report
    cfg = manifest.config
    W, H = cfg.rig.width, cfg.rig.height

    if len(manifest.scenes) != cfg.num_scenes:
        fail(Failure("manifest", MANIFEST_NAME, f"{len(manifest.scenes)} scenes listed, config says {cfg.num_scenes}"))

    listed_dirs = {s["dir"] for s in manifest.scenes}
    for p in sorted(root.iterdir()):
        if p.is_dir() and p.name.startswith("scene_") and p.name not in listed_dirs:
            fail(Failure("extra-file", p.name, "scene directory not in manifest"))

    for s in manifest.scenes:
        sdir = root / s["dir"]
        listed = {v["rgb"] for v in s["views"]} | {v["depth"] for v in s["views"]} | {s["disparity_ref"]}
        if sdir.is_dir():
            for p in sorted(sdir.iterdir()):
                if p.name not in listed:
                    fail(Failure("extra-file", f"{s['dir']}/{p.name}", "file not in manifest"))
        ref = s["reference_view"]
        ref_depth = None
        for v in s["views"]:
            rgb_path = sdir / v["rgb"]
            depth_path = sdir / v["depth"]
            rel_rgb = f"{s['dir']}/{v['rgb']}"
            rel_depth = f"{s['dir']}/{v['depth']}"
            if not rgb_path.is_file():
                fail(Failure("missing-file", rel_rgb, "listed in manifest but absent"))
            else:
                report.checked_files += 1
                size = codecs.image_size(rgb_path.read_bytes())
                if size != (W, H):
                    fail(Failure("dimension-mismatch", rel_rgb, f"image is {size[0]}x{size[1]}, config says {W}x{H}"))
            if not depth_path.is_file():
                fail(Failure("missing-file", rel_depth, "listed in manifest but absent"))
                continue
            report.checked_files += 1
            data = depth_path.read_bytes()
            try:
                depth = decode_depth(cfg, data)
            except (ValueError, OSError) as e:
                fail(Failure("invalid-depth", rel_depth, f"cannot decode: {e}"))
                continue
            if depth.shape != (H, W):
                fail(Failure("dimension-mismatch", rel_depth, f"depth is {depth.shape[1]}x{depth.shape[0]}, config says {W}x{H}"))
                continue
            bad = ~(depth > 0)
            if bad.any():
                y, x = (int(i) for i in np.argwhere(bad)[0])
                fail(Failure("invalid-depth", rel_depth, f"{int(bad.sum())} non-positive or NaN value(s), first at pixel (x={x}, y={y})"))
                continue
            if (v["u"], v["v"]) == (ref["u"], ref["v"]):
                ref_depth = (rel_depth, data)

        disp_path = sdir / s["disparity_ref"]
        rel_disp = f"{s['dir']}/{s['disparity_ref']}"
        if not disp_path.is_file():
            fail(Failure("missing-file", rel_disp, "listed in manifest but absent"))
            continue
        report.checked_files += 1
        if ref_depth is None:
            continue
        try:
            stored = codecs.read_pfm(disp_path.read_bytes())
        except ValueError as e:
            fail(Failure("invalid-depth", rel_disp, f"cannot decode: {e}"))
            continue
        if stored.shape != (H, W):
            fail(Failure("dimension-mismatch", rel_disp, f"disparity is {stored.shape[1]}x{stored.shape[0]}, config says {W}x{H}"))
            continue
        expected = stored_disparity(cfg, ref_depth[1])
        diff = np.abs(expected.astype(np.float64) - stored.astype(np.float64))
        wrong = ~(diff <= DISPARITY_TOLERANCE)
        if wrong.any():
            y, x = (int(i) for i in np.argwhere(wrong)[0])
            fail(
                Failure(
                    "disparity-mismatch",
                    rel_disp,
                    f"view {ref_depth[0]} (u={ref['u']}, v={ref['v']}): {int(wrong.sum())} pixel(s) differ, "
                    f"first at pixel (x={x}, y={y}): stored {stored[y, x]:.6g}, recomputed {expected[y, x]:.6g}",
                )
            )
    return report


# --- benchmarking ---


@dataclass(frozen=True)
class BenchRow:
    size: int
    seconds: float
    runs: tuple[float, ...] = ()

    @property
    def seconds_per_scene(self) -> float:
        return self.seconds / self.size


def bench(template: RunConfig, sizes, workdir=None, progress=None, repeats: int = 1) -> list[BenchRow]:
    """Time ``generate_dataset`` for each scene count, each into a fresh temp directory.

    With ``repeats > 1`` every size is timed that many times and the fastest
    run is reported; passes alternate direction through ``sizes`` so slow
    drift in machine speed lands evenly on every size.
    """
    sizes = list(sizes)
    if not sizes:
        raise ConfigError("sizes", "need at least one dataset size")
    for n in sizes:
        if not isinstance(n, int) or n < 1:
            raise ConfigError("sizes", f"sizes must be positive integers, got {n!r}")
    if not isinstance(repeats, int) or repeats < 1:
        raise ConfigError("repeats", "must be an integer >= 1")
    runs: dict[int, list[float]] = {n: [] for n in sizes}
    for rep in range(repeats):
        for n in sizes if rep % 2 == 0 else reversed(sizes):
            with tempfile.TemporaryDirectory(dir=workdir, prefix="lfgen_bench_") as tmp:
                cfg = with_updates(template, num_scenes=n, output_dir=tmp)
                manifest = generate_dataset(cfg, overwrite=True)
                runs[n].append(manifest.timing["total_seconds"])
            if progress:
                progress(BenchRow(n, runs[n][-1]))
    return [BenchRow(n, min(runs[n]), tuple(runs[n])) for n in sizes]


def linearity(rows: list[BenchRow]) -> dict:
    """Least-squares fit of total time against size, plus per-scene spread."""
    x = np.array([r.size for r in rows], dtype=np.float64)
    y = np.array([r.seconds for r in rows], dtype=np.float64)
    per = y / x
    out = {"per_scene_mean": float(per.mean()), "per_scene_spread": float(np.max(np.abs(per - per.mean())) / per.mean())}
    if len(rows) >= 2 and np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        out.update(slope=float(slope), intercept=float(intercept), r2=1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0)
    return out


def _human(seconds: float) -> str:
    text = f"{seconds:.1f} seconds"
    if seconds >= 60:
        m, s = divmod(int(round(seconds)), 60)
        text += f" ({m} minute{'s' if m != 1 else ''} {s} second{'s' if s != 1 else ''})"
    return text


def format_table(rows: list[BenchRow]) -> str:
    head = ("Dataset Size, in number of scenes", "Dataset Creation Time")
    body = [(str(r.size), _human(r.seconds)) for r in rows]
    w = max(len(head[0]), *(len(b[0]) for b in body))
    lines = [f"{head[0]:<{w}}  {head[1]}"] + [f"{a:<{w}}  {b}" for a, b in body]
    return "\n".join(lines)


def bench_document(template: RunConfig, rows: list[BenchRow]) -> dict:
    stats = linearity(rows)
    return {
        "tool_version": __version__,
        "config": to_dict(template),
        "rows": [{"size": r.size, "seconds": r.seconds, "seconds_per_scene": r.seconds_per_scene, "runs": list(r.runs)} for r in rows],
        "linearity": {k: (v if math.isfinite(v) else None) for k, v in stats.items()},
    }
