import errno
import hashlib
import json
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import lfgen.dataset as ds
from lfgen import codecs
from lfgen.dataset import (
    BenchRow,
    bench,
    format_table,
    generate_dataset,
    linearity,
    read_manifest,
    validate_dataset,
)
from lfgen.errors import ConfigError, DatasetIOError
from lfgen.lightfield import capture_lightfield
from lfgen.rig import RigConfig, depth_to_disparity
from lfgen.scene import spawn_scene

from conftest import small_run


def _hashes(root):
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


def _without_volatile(doc):
    doc = json.loads(json.dumps(doc))
    doc.pop("timing")
    doc["config"].pop("output_dir")
    return doc


def test_layout_and_inventory(tmp_path):
    cfg = small_run(tmp_path, num_scenes=5)
    manifest = generate_dataset(cfg)
    root = Path(cfg.output_dir)
    assert sorted(p.name for p in root.iterdir()) == ["manifest.json"] + [f"scene_{i:05d}" for i in range(5)]
    rgb = sorted(root.glob("scene_*/rgb_u*_v*.png"))
    depth = sorted(root.glob("scene_*/depth_u*_v*.pfm"))
    assert len(rgb) == len(depth) == 45
    assert len(list(root.glob("scene_*/disparity_ref.pfm"))) == 5
    assert sorted(manifest.files()) == sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file() and p.name != "manifest.json")
    assert (root / "scene_00002" / "rgb_u01_v02.png").is_file()


def test_manifest_contents(tmp_path):
    cfg = small_run(tmp_path)
    generate_dataset(cfg)
    m = read_manifest(cfg.output_dir)
    assert m.config == cfg
    s = m.scenes[1]
    assert s["scene_id"] == 1 and s["seed"] == cfg.seed
    assert s["reference_view"] == {"u": 1, "v": 1}
    assert s["object_count"] == 6
    assert len(s["views"]) == 9
    v = s["views"][5]
    assert (v["u"], v["v"]) == (2, 1)
    assert v["intrinsics"]["f_px"] == cfg.rig.f_px
    assert v["position"][0] == pytest.approx(0.2)
    assert len(m.timing["per_scene_seconds"]) == 2


def test_stored_files_match_the_render(tmp_path):
    cfg = small_run(tmp_path, num_scenes=1)
    generate_dataset(cfg)
    lf = capture_lightfield(spawn_scene(cfg.seed, 0, cfg.gen), cfg.rig, cfg.render)
    sdir = Path(cfg.output_dir) / "scene_00000"
    frame = lf.view(2, 0)
    assert np.array_equal(codecs.read_image((sdir / "rgb_u02_v00.png").read_bytes()), codecs.linear_to_8bit(frame.rgb))
    assert np.array_equal(codecs.read_pfm((sdir / "depth_u02_v00.pfm").read_bytes()), frame.depth.astype(np.float32))
    disp = codecs.read_pfm((sdir / "disparity_ref.pfm").read_bytes())
    want = depth_to_disparity(lf.view(1, 1).depth.astype(np.float32).astype(np.float64), cfg.rig.f_px, cfg.rig.baseline_u)
    assert np.array_equal(disp, want.astype(np.float32))


def test_two_runs_are_byte_identical(tmp_path):
    a = small_run(tmp_path, "a", num_scenes=3)
    b = small_run(tmp_path, "b", num_scenes=3)
    ma, mb = generate_dataset(a), generate_dataset(b)
    assert _hashes(a.output_dir) == _hashes(b.output_dir)
    assert _without_volatile(ma.doc) == _without_volatile(mb.doc)


def test_process_workers_give_the_same_bytes(tmp_path):
    a = small_run(tmp_path, "a", num_scenes=3)
    b = small_run(tmp_path, "b", num_scenes=3, workers=2)
    generate_dataset(a)
    generate_dataset(b)
    assert _hashes(a.output_dir) == _hashes(b.output_dir)


def test_other_formats(tmp_path):
    cfg = small_run(tmp_path, num_scenes=1, image_format="ppm", depth_format="png16", depth_png16_scale=0.002)
    generate_dataset(cfg)
    sdir = Path(cfg.output_dir) / "scene_00000"
    assert (sdir / "rgb_u00_v00.ppm").read_bytes().startswith(b"P6\n48 40\n255\n")
    depth = codecs.read_depth_png16((sdir / "depth_u01_v01.png").read_bytes(), 0.002)
    disp = codecs.read_pfm((sdir / "disparity_ref.pfm").read_bytes())
    assert np.array_equal(disp, depth_to_disparity(depth, cfg.rig.f_px, 0.2).astype(np.float32))
    assert validate_dataset(cfg.output_dir).ok


def test_refuses_non_empty_dir_unless_forced(tmp_path):
    cfg = small_run(tmp_path, num_scenes=1)
    generate_dataset(cfg)
    with pytest.raises(DatasetIOError):
        generate_dataset(cfg)
    keep = Path(cfg.output_dir) / "notes.txt"
    keep.write_text("mine")
    generate_dataset(replace(cfg, num_scenes=2), overwrite=True)
    assert keep.read_text() == "mine"
    assert len(read_manifest(cfg.output_dir).scenes) == 2


def test_unwritable_output_fails_before_rendering(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    calls = []
    monkeypatch.setattr(ds, "_produce_scene", lambda *a: calls.append(a))
    with pytest.raises(DatasetIOError) as err:
        generate_dataset(small_run(tmp_path, "file/sub"))
    assert "file" in str(err.value)
    assert calls == []


def test_disk_full_names_the_file_and_writes_no_manifest(tmp_path, monkeypatch):
    cfg = small_run(tmp_path, num_scenes=2)
    real_replace = os.replace
    count = [0]

    def flaky(src, dst):
        count[0] += 1
        if count[0] == 12:
            raise OSError(errno.ENOSPC, "No space left on device")
        real_replace(src, dst)

    monkeypatch.setattr(ds.os, "replace", flaky)
    with pytest.raises(DatasetIOError) as err:
        generate_dataset(cfg)
    assert "depth_u02_v01.pfm" in str(err.value)
    assert "No space left" in str(err.value)
    root = Path(cfg.output_dir)
    assert not (root / "manifest.json").exists()
    assert not list(root.rglob(".*.tmp"))


def test_invalid_config_is_rejected_before_writing(tmp_path):
    cfg = small_run(tmp_path, rig=RigConfig(nu=0))
    with pytest.raises(ConfigError):
        generate_dataset(cfg)
    assert not Path(cfg.output_dir).exists()


# --- validation ---


@pytest.fixture
def fresh(tmp_path):
    cfg = small_run(tmp_path, num_scenes=2)
    generate_dataset(cfg)
    return Path(cfg.output_dir)


def test_fresh_dataset_validates(fresh):
    report = validate_dataset(fresh)
    assert report.ok and report.failures == []
    assert report.checked_files == 2 * 19


def test_deleted_file_is_the_only_failure(fresh):
    (fresh / "scene_00001" / "rgb_u00_v02.png").unlink()
    report = validate_dataset(fresh)
    assert [(f.kind, f.path) for f in report.failures] == [("missing-file", "scene_00001/rgb_u00_v02.png")]


def _patch_pfm_value(path, x, y, value):
    data = path.read_bytes()
    depth = codecs.read_pfm(data)
    depth[y, x] = value
    path.write_bytes(codecs.write_depth_pfm(depth))


def test_corrupted_reference_depth_is_a_disparity_mismatch(fresh):
    _patch_pfm_value(fresh / "scene_00000" / "depth_u01_v01.pfm", 5, 7, 123.0)
    report = validate_dataset(fresh)
    assert len(report.failures) == 1
    f = report.failures[0]
    assert f.kind == "disparity-mismatch" and f.path == "scene_00000/disparity_ref.pfm"
    assert "depth_u01_v01.pfm" in f.detail and "(x=5, y=7)" in f.detail


def test_negative_depth_is_invalid(fresh):
    _patch_pfm_value(fresh / "scene_00001" / "depth_u02_v00.pfm", 3, 4, -1.0)
    report = validate_dataset(fresh)
    assert [(f.kind, f.path) for f in report.failures] == [("invalid-depth", "scene_00001/depth_u02_v00.pfm")]
    assert "(x=3, y=4)" in report.failures[0].detail


def test_extra_and_resized_files(fresh):
    (fresh / "scene_00000" / "stray.txt").write_text("?")
    (fresh / "scene_00001" / "rgb_u00_v00.png").write_bytes(codecs.write_image_png8(np.zeros((5, 5, 3))))
    kinds = sorted((f.kind, f.path) for f in validate_dataset(fresh).failures)
    assert kinds == [("dimension-mismatch", "scene_00001/rgb_u00_v00.png"), ("extra-file", "scene_00000/stray.txt")]


def test_broken_manifest(fresh):
    (fresh / "manifest.json").write_text("{")
    report = validate_dataset(fresh)
    assert [f.kind for f in report.failures] == ["manifest"]


# --- bench ---


def test_bench_single_size(tmp_path):
    rows = bench(small_run(tmp_path, num_scenes=1), [1], workdir=tmp_path)
    assert len(rows) == 1 and rows[0].size == 1 and rows[0].seconds > 0
    assert list(tmp_path.iterdir()) == []
    assert "r2" not in linearity(rows)


def test_bench_grows_with_size(tmp_path):
    rows = bench(small_run(tmp_path), [1, 4], workdir=tmp_path)
    assert rows[1].seconds > rows[0].seconds


def test_bench_rejects_bad_sizes(tmp_path):
    for sizes in ([], [0], [2, -1]):
        with pytest.raises(ConfigError):
            bench(small_run(tmp_path), sizes)
    with pytest.raises(ConfigError):
        bench(small_run(tmp_path), [1], repeats=0)


def test_bench_repeats_keep_the_fastest(tmp_path):
    seen = []
    rows = bench(small_run(tmp_path), [1, 2], workdir=tmp_path, progress=lambda r: seen.append(r.size), repeats=3)
    assert seen == [1, 2, 2, 1, 1, 2]
    for r in rows:
        assert len(r.runs) == 3 and r.seconds == min(r.runs)


def test_linearity_of_exact_line():
    rows = [BenchRow(n, 0.5 + 0.16 * n) for n in (100, 200, 500, 1000)]
    stats = linearity(rows)
    assert stats["slope"] == pytest.approx(0.16)
    assert stats["intercept"] == pytest.approx(0.5)
    assert stats["r2"] == pytest.approx(1.0)


def test_linearity_spread_of_published_style_table():
    rows = [BenchRow(100, 16.3), BenchRow(200, 31.0), BenchRow(2000, 310.0)]
    stats = linearity(rows)
    assert stats["per_scene_spread"] == pytest.approx((0.163 - stats["per_scene_mean"]) / stats["per_scene_mean"])
    assert stats["per_scene_spread"] < 0.25


def test_table_format():
    text = format_table([BenchRow(100, 16.3), BenchRow(1000, 157.0)])
    lines = text.splitlines()
    assert lines[0].startswith("Dataset Size, in number of scenes")
    assert "16.3 seconds" in lines[1]
    assert "157.0 seconds (2 minutes 37 seconds)" in lines[2]
