"""Run configuration: one JSON document mirroring the dataclasses.

Loading is strict. Unknown keys are rejected, and every error names the
dotted path of the offending field. Overrides use the same dotted paths
(``rig.nu=3``, ``gen.shape_weights.box=0``) and are applied after the file.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from lfgen.errors import ConfigError
from lfgen.render import RenderSettings
from lfgen.rig import JitterParams, RigConfig
from lfgen.scene import GenParams, material_from_dict, material_to_dict

IMAGE_FORMATS = ("png8", "ppm")
DEPTH_FORMATS = ("pfm32", "png16")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    num_scenes: int = 1
    gen: GenParams = field(default_factory=GenParams)
    rig: RigConfig = field(default_factory=RigConfig)
    render: RenderSettings = field(default_factory=RenderSettings)
    output_dir: str = "snapshots"
    image_format: str = "png8"
    depth_format: str = "pfm32"
    depth_png16_scale: float = 0.001
    workers: int = 1

    def validate(self):
        if not _is_int(self.seed) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not _is_int(self.num_scenes) or self.num_scenes < 1:
            raise ConfigError("num_scenes", "must be an integer >= 1")
        if self.image_format not in IMAGE_FORMATS:
            raise ConfigError("image_format", f"must be one of {IMAGE_FORMATS}")
        if self.depth_format not in DEPTH_FORMATS:
            raise ConfigError("depth_format", f"must be one of {DEPTH_FORMATS}")
        if self.depth_format == "png16" and not self.depth_png16_scale > 0:
            raise ConfigError("depth_png16_scale", "must be > 0 for png16 depth")
        if not _is_int(self.workers) or self.workers < 1:
            raise ConfigError("workers", "must be an integer >= 1")
        if not self.output_dir:
            raise ConfigError("output_dir", "must not be empty")
        self.gen.validate("gen")
        self.rig.validate("rig")
        self.render.validate("render")

    @property
    def image_ext(self) -> str:
        return "png" if self.image_format == "png8" else "ppm"

    @property
    def depth_ext(self) -> str:
        return "pfm" if self.depth_format == "pfm32" else "png"


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


# --- dataclass -> plain dict ---


def gen_to_dict(g: GenParams) -> dict:
    return {
        "object_count": g.object_count,
        "spawn_min": list(g.spawn_min),
        "spawn_max": list(g.spawn_max),
        "size_range": list(g.size_range),
        "shape_weights": dict(sorted(g.shape_weights.items())),
        "palette": g.palette if isinstance(g.palette, str) else [material_to_dict(m) for m in g.palette],
        "checker_fraction": g.checker_fraction,
        "checker_cell_range": list(g.checker_cell_range),
        "ground": g.ground,
        "ground_height": g.ground_height,
        "ground_material": material_to_dict(g.ground_material),
        "background_color": list(g.background_color),
        "light_intensity": g.light_intensity,
        "light_ambient": g.light_ambient,
    }


def rig_to_dict(r: RigConfig) -> dict:
    return {
        "nu": r.nu,
        "nv": r.nv,
        "baseline_u": r.baseline_u,
        "baseline_v": r.baseline_v,
        "width": r.width,
        "height": r.height,
        "vfov": r.vfov,
        "jitter": None if r.jitter is None else asdict(r.jitter),
        "rig_center": list(r.rig_center),
        "look_axis": list(r.look_axis),
        "focus_distance": r.focus_distance,
    }


def to_dict(cfg: RunConfig) -> dict:
    return {
        "seed": cfg.seed,
        "num_scenes": cfg.num_scenes,
        "gen": gen_to_dict(cfg.gen),
        "rig": rig_to_dict(cfg.rig),
        "render": asdict(cfg.render),
        "output_dir": str(cfg.output_dir),
        "image_format": cfg.image_format,
        "depth_format": cfg.depth_format,
        "depth_png16_scale": cfg.depth_png16_scale,
        "workers": cfg.workers,
    }


# --- plain dict -> dataclass ---


def _num(v, path, integer=False):
    if integer:
        if not _is_int(v):
            raise ConfigError(path, f"expected an integer, got {v!r}")
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return float(v)


def _vec(v, n, path):
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ConfigError(path, f"expected a list of {n} numbers")
    return tuple(_num(x, path) for x in v)


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true/false, got {v!r}")
    return v


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path or "<root>", "expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")


def gen_from_dict(d: dict, path="gen") -> GenParams:
    base = gen_to_dict(GenParams())
    _check_keys(d, base, path)
    d = {**base, **d}
    weights = d["shape_weights"]
    if not isinstance(weights, dict):
        raise ConfigError(f"{path}.shape_weights", "expected an object")
    palette = d["palette"]
    if not isinstance(palette, str):
        if not isinstance(palette, list):
            raise ConfigError(f"{path}.palette", "expected 'random' or a list of materials")
        palette = tuple(material_from_dict(m, f"{path}.palette[{i}]") for i, m in enumerate(palette))
    return GenParams(
        object_count=_num(d["object_count"], f"{path}.object_count", integer=True),
        spawn_min=_vec(d["spawn_min"], 3, f"{path}.spawn_min"),
        spawn_max=_vec(d["spawn_max"], 3, f"{path}.spawn_max"),
        size_range=_vec(d["size_range"], 2, f"{path}.size_range"),
        shape_weights={k: _num(w, f"{path}.shape_weights.{k}") for k, w in weights.items()},
        palette=palette,
        checker_fraction=_num(d["checker_fraction"], f"{path}.checker_fraction"),
        checker_cell_range=_vec(d["checker_cell_range"], 2, f"{path}.checker_cell_range"),
        ground=_bool(d["ground"], f"{path}.ground"),
        ground_height=_num(d["ground_height"], f"{path}.ground_height"),
        ground_material=material_from_dict(d["ground_material"], f"{path}.ground_material"),
        background_color=_vec(d["background_color"], 3, f"{path}.background_color"),
        light_intensity=_num(d["light_intensity"], f"{path}.light_intensity"),
        light_ambient=_num(d["light_ambient"], f"{path}.light_ambient"),
    )


def rig_from_dict(d: dict, path="rig") -> RigConfig:
    base = rig_to_dict(RigConfig())
    _check_keys(d, base, path)
    d = {**base, **d}
    jitter = d["jitter"]
    if jitter is not None:
        jbase = asdict(JitterParams())
        _check_keys(jitter, jbase, f"{path}.jitter")
        jitter = {**jbase, **jitter}
        jitter = JitterParams(
            seed=_num(jitter["seed"], f"{path}.jitter.seed", integer=True),
            translation_sigma=_num(jitter["translation_sigma"], f"{path}.jitter.translation_sigma"),
            rotation_sigma=_num(jitter["rotation_sigma"], f"{path}.jitter.rotation_sigma"),
        )
    return RigConfig(
        nu=_num(d["nu"], f"{path}.nu", integer=True),
        nv=_num(d["nv"], f"{path}.nv", integer=True),
        baseline_u=_num(d["baseline_u"], f"{path}.baseline_u"),
        baseline_v=_num(d["baseline_v"], f"{path}.baseline_v"),
        width=_num(d["width"], f"{path}.width", integer=True),
        height=_num(d["height"], f"{path}.height", integer=True),
        vfov=_num(d["vfov"], f"{path}.vfov"),
        jitter=jitter,
        rig_center=_vec(d["rig_center"], 3, f"{path}.rig_center"),
        look_axis=_vec(d["look_axis"], 3, f"{path}.look_axis"),
        focus_distance=_num(d["focus_distance"], f"{path}.focus_distance"),
    )


def render_from_dict(d: dict, path="render") -> RenderSettings:
    base = asdict(RenderSettings())
    _check_keys(d, base, path)
    d = {**base, **d}

    def optional(k):
        return None if d[k] is None else _num(d[k], f"{path}.{k}")

    return RenderSettings(
        shadows=_bool(d["shadows"], f"{path}.shadows"),
        ambient_override=optional("ambient_override"),
        max_depth_clip=optional("max_depth_clip"),
    )


def from_dict(d: dict) -> RunConfig:
    """Build and validate a RunConfig; missing keys take their defaults."""
    base = to_dict(RunConfig())
    _check_keys(d, base, "")
    cfg = RunConfig(
        seed=_num(d.get("seed", base["seed"]), "seed", integer=True),
        num_scenes=_num(d.get("num_scenes", base["num_scenes"]), "num_scenes", integer=True),
        gen=gen_from_dict(d.get("gen", {})),
        rig=rig_from_dict(d.get("rig", {})),
        render=render_from_dict(d.get("render", {})),
        output_dir=str(d.get("output_dir", base["output_dir"])),
        image_format=d.get("image_format", base["image_format"]),
        depth_format=d.get("depth_format", base["depth_format"]),
        depth_png16_scale=_num(d.get("depth_png16_scale", base["depth_png16_scale"]), "depth_png16_scale"),
        workers=_num(d.get("workers", base["workers"]), "workers", integer=True),
    )
    cfg.validate()
    return cfg


# --- overrides ---

_OPTIONAL_SECTIONS = {("rig", "jitter"): lambda: asdict(JitterParams())}


def parse_override(item: str) -> tuple[str, object]:
    """``"rig.nu=3"`` -> ``("rig.nu", 3)``; values are JSON, falling back to a bare string."""
    if "=" not in item:
        raise ConfigError(item, "override must look like KEY=VALUE")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(item, "empty override key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(doc: dict, overrides) -> dict:
    """Set dotted keys in a full config dict; unknown keys raise ConfigError."""
    doc = copy.deepcopy(doc)
    for key, value in overrides:
        parts = key.split(".")
        node = doc
        for i, part in enumerate(parts[:-1]):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(key, "unknown key")
            if node[part] is None and tuple(parts[: i + 1]) in _OPTIONAL_SECTIONS:
                node[part] = _OPTIONAL_SECTIONS[tuple(parts[: i + 1])]()
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(key, "unknown key")
        node[parts[-1]] = value
    return doc


def resolve(config_path=None, overrides=(), output_dir=None) -> RunConfig:
    """Defaults, then the JSON file, then ``--set`` overrides, then ``--out``."""
    doc = to_dict(RunConfig())
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError("config", f"cannot read {config_path}: {e.strerror}") from None
        try:
            file_doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"{config_path} is not valid JSON: {e}") from None
        doc = _merge(doc, file_doc, "")
    doc = apply_overrides(doc, [parse_override(o) if isinstance(o, str) else o for o in overrides])
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    return from_dict(doc)


def _merge(base, patch, path):
    _check_keys(patch, base, path)
    out = dict(base)
    for k, v in patch.items():
        sub = f"{path}.{k}" if path else k
        if isinstance(v, dict) and isinstance(base[k], dict) and k != "shape_weights" and "kind" not in v:
            out[k] = _merge(base[k], v, sub)
        else:
            out[k] = v
    return out


def with_updates(cfg: RunConfig, **changes) -> RunConfig:
    out = replace(cfg, **changes)
    out.validate()
    return out


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True)
