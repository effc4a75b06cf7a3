"""Seeded procedural scene descriptions.

Every scene is drawn from its own random stream, keyed by ``(seed,
scene_id)``::

    PCG64(SeedSequence(entropy=seed, spawn_key=(scene_id,)))

Only ``Generator.random()`` (uniform doubles in [0, 1)) is consumed;
choices, sizes and angles are derived from those doubles by the code
below, so a scene depends only on the PCG64 / SeedSequence algorithms and
not on numpy's distribution samplers.

Draw order for one scene:

1. light azimuth, light elevation (2 draws)
2. per object, in order:
   shape pick (1), center x, y, z (3), size (1 for a sphere, 3 for a
   box), rotation (box only, 1), material (see ``_draw_material``)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from lfgen.errors import ConfigError

TWO_PI = 2.0 * math.pi
SEED_DERIVATION = "PCG64(SeedSequence(entropy=seed, spawn_key=(scene_id,))); uniform doubles only"
SHAPE_KINDS = ("sphere", "box")


@dataclass(frozen=True)
class Solid:
    rgb: tuple[float, float, float]


@dataclass(frozen=True)
class Checker:
    rgb_a: tuple[float, float, float]
    rgb_b: tuple[float, float, float]
    cell_size: float


Material = Union[Solid, Checker]


@dataclass(frozen=True)
class Sphere:
    radius: float


@dataclass(frozen=True)
class Box:
    half_extents: tuple[float, float, float]


Shape = Union[Sphere, Box]


@dataclass(frozen=True)
class SceneObject:
    shape: Shape
    center: tuple[float, float, float]
    rotation: float  # about the vertical (y) axis, radians
    material: Material

    def bounding_radius(self) -> float:
        if isinstance(self.shape, Sphere):
            return self.shape.radius
        return math.sqrt(sum(h * h for h in self.shape.half_extents))


@dataclass(frozen=True)
class GroundPlane:
    height: float
    material: Material


@dataclass(frozen=True)
class DirectionalLight:
    direction: tuple[float, float, float]  # direction the light travels
    intensity: float = 1.0
    ambient: float = 0.15


@dataclass(frozen=True)
class SceneSpec:
    scene_id: int
    seed: int
    objects: tuple[SceneObject, ...]
    light: DirectionalLight
    ground: GroundPlane | None
    background_color: tuple[float, float, float]


DEFAULT_GROUND_MATERIAL = Checker((0.8, 0.8, 0.8), (0.35, 0.35, 0.35), 1.0)
DEFAULT_BACKGROUND = (0.55, 0.7, 0.9)


@dataclass(frozen=True)
class GenParams:
    """Knobs for :func:`spawn_scene`.

    ``palette`` is either the string ``"random"`` (random solid RGB, with a
    ``checker_fraction`` share of random two-colour checkers) or a tuple of
    materials picked uniformly.
    """

    object_count: int = 40
    spawn_min: tuple[float, float, float] = (-4.0, -4.0, 2.0)
    spawn_max: tuple[float, float, float] = (4.0, 4.0, 10.0)
    size_range: tuple[float, float] = (0.2, 0.8)
    shape_weights: dict = field(default_factory=lambda: {"sphere": 1.0, "box": 1.0})
    palette: Union[str, tuple] = "random"
    checker_fraction: float = 0.25
    checker_cell_range: tuple[float, float] = (0.08, 0.3)
    ground: bool = True
    ground_height: float = -1.0
    ground_material: Material = DEFAULT_GROUND_MATERIAL
    background_color: tuple[float, float, float] = DEFAULT_BACKGROUND
    light_intensity: float = 1.0
    light_ambient: float = 0.15

    def validate(self, prefix="gen"):
        def bad(name, msg):
            raise ConfigError(f"{prefix}.{name}", msg)

        if not isinstance(self.object_count, int) or isinstance(self.object_count, bool) or self.object_count < 0:
            bad("object_count", "must be a non-negative integer")
        for name in ("spawn_min", "spawn_max", "background_color"):
            v = getattr(self, name)
            if len(v) != 3 or not all(math.isfinite(c) for c in v):
                bad(name, "must be three finite numbers")
        if not all(lo < hi for lo, hi in zip(self.spawn_min, self.spawn_max)):
            bad("spawn_min", "spawn bounds need min < max on every axis")
        lo, hi = self.size_range
        if not (0 < lo <= hi and math.isfinite(hi)):
            bad("size_range", "need 0 < min <= max")
        if not self.shape_weights:
            bad("shape_weights", "must not be empty")
        for k, w in self.shape_weights.items():
            if k not in SHAPE_KINDS:
                bad("shape_weights", f"unknown shape {k!r}")
            if not (w >= 0 and math.isfinite(w)):
                bad("shape_weights", "weights must be finite and >= 0")
        if sum(self.shape_weights.values()) <= 0:
            bad("shape_weights", "weights must sum to a positive value")
        if isinstance(self.palette, str):
            if self.palette != "random":
                bad("palette", "must be 'random' or a list of materials")
        else:
            if len(self.palette) == 0:
                bad("palette", "material list must not be empty")
            for m in self.palette:
                _validate_material(m, f"{prefix}.palette")
        if not 0 <= self.checker_fraction <= 1:
            bad("checker_fraction", "must lie in [0, 1]")
        clo, chi = self.checker_cell_range
        if not 0 < clo <= chi:
            bad("checker_cell_range", "need 0 < min <= max")
        _validate_material(self.ground_material, f"{prefix}.ground_material")
        if not all(0 <= c <= 1 for c in self.background_color):
            bad("background_color", "components must lie in [0, 1]")
        if self.light_intensity < 0:
            bad("light_intensity", "must be >= 0")
        if not 0 <= self.light_ambient <= 1:
            bad("light_ambient", "must lie in [0, 1]")


def _validate_material(m, path):
    if isinstance(m, Solid):
        colors = [m.rgb]
    elif isinstance(m, Checker):
        colors = [m.rgb_a, m.rgb_b]
        if not m.cell_size > 0:
            raise ConfigError(f"{path}.cell_size", "must be > 0")
    else:
        raise ConfigError(path, f"not a material: {m!r}")
    for rgb in colors:
        if len(rgb) != 3 or not all(0 <= c <= 1 for c in rgb):
            raise ConfigError(path, "rgb components must lie in [0, 1]")


def scene_rng(seed: int, scene_id: int) -> np.random.Generator:
    """Independent random stream for one scene."""
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if scene_id < 0:
        raise ConfigError("scene_id", "must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(scene_id,))
    return np.random.Generator(np.random.PCG64(ss))


class _Draws:
    """Thin cursor over a generator that only ever asks for uniform doubles."""

    def __init__(self, rng):
        self._rng = rng

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * float(self._rng.random())

    def rgb(self):
        return (self.uniform(), self.uniform(), self.uniform())

    def pick(self, weights):
        # inverse CDF over the cumulative weights
        total = sum(weights)
        x = self.uniform() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if x < acc:
                return i
        return max(i for i, w in enumerate(weights) if w > 0)


def _draw_material(draws: _Draws, params: GenParams) -> Material:
    if not isinstance(params.palette, str):
        return params.palette[draws.pick([1.0] * len(params.palette))]
    if draws.uniform() < params.checker_fraction:
        a = draws.rgb()
        b = draws.rgb()
        return Checker(a, b, draws.uniform(*params.checker_cell_range))
    return Solid(draws.rgb())


def _draw_light(draws: _Draws, params: GenParams) -> DirectionalLight:
    azimuth = draws.uniform(0.0, TWO_PI)
    elevation = draws.uniform(math.radians(35.0), math.radians(75.0))
    # light travels downward, toward -y
    c = math.cos(elevation)
    d = (c * math.cos(azimuth), -math.sin(elevation), c * math.sin(azimuth))
    n = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
    return DirectionalLight(
        direction=(d[0] / n, d[1] / n, d[2] / n),
        intensity=params.light_intensity,
        ambient=params.light_ambient,
    )


def spawn_scene(seed: int, scene_id: int, params: GenParams | None = None) -> SceneSpec:
    """Generate scene ``scene_id`` of the run keyed by ``seed``."""
    params = GenParams() if params is None else params
    params.validate()
    draws = _Draws(scene_rng(seed, scene_id))

    light = _draw_light(draws, params)
    kinds = list(SHAPE_KINDS)
    weights = [float(params.shape_weights.get(k, 0.0)) for k in kinds]
    lo, hi = params.spawn_min, params.spawn_max
    smin, smax = params.size_range

    objects = []
    for _ in range(params.object_count):
        kind = kinds[draws.pick(weights)]
        center = tuple(min(draws.uniform(lo[i], hi[i]), hi[i]) for i in range(3))
        if kind == "sphere":
            shape = Sphere(min(draws.uniform(smin, smax), smax))
            rotation = 0.0
        else:
            shape = Box(tuple(min(draws.uniform(smin, smax), smax) for _ in range(3)))
            rotation = draws.uniform(0.0, TWO_PI)
            if rotation >= TWO_PI:
                rotation = 0.0
        objects.append(SceneObject(shape, center, rotation, _draw_material(draws, params)))

    ground = GroundPlane(params.ground_height, params.ground_material) if params.ground else None
    return SceneSpec(
        scene_id=scene_id,
        seed=seed,
        objects=tuple(objects),
        light=light,
        ground=ground,
        background_color=tuple(params.background_color),
    )


def regenerate(seed: int, scene_id: int, params: GenParams | None = None) -> SceneSpec:
    """Drop scene ``scene_id`` and draw the next one from a fresh stream."""
    return spawn_scene(seed, scene_id + 1, params)


# --- plain-dict conversion (manifest / config documents) ---


def material_to_dict(m: Material) -> dict:
    if isinstance(m, Solid):
        return {"kind": "solid", "rgb": list(m.rgb)}
    return {"kind": "checker", "rgb_a": list(m.rgb_a), "rgb_b": list(m.rgb_b), "cell_size": m.cell_size}


def material_from_dict(d, path="material") -> Material:
    if not isinstance(d, dict):
        raise ConfigError(path, "material must be an object")
    kind = d.get("kind")
    try:
        if kind == "solid":
            _only_keys(d, {"kind", "rgb"}, path)
            m = Solid(_vec3(d["rgb"], f"{path}.rgb"))
        elif kind == "checker":
            _only_keys(d, {"kind", "rgb_a", "rgb_b", "cell_size"}, path)
            m = Checker(_vec3(d["rgb_a"], f"{path}.rgb_a"), _vec3(d["rgb_b"], f"{path}.rgb_b"), float(d["cell_size"]))
        else:
            raise ConfigError(f"{path}.kind", f"unknown material kind {kind!r}")
    except KeyError as e:
        raise ConfigError(f"{path}.{e.args[0]}", "missing") from None
    _validate_material(m, path)
    return m


def _only_keys(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", "unknown key")


def _vec3(v, path):
    try:
        out = tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(path, "must be a list of three numbers") from None
    if len(out) != 3:
        raise ConfigError(path, "must be a list of three numbers")
    return out


def scene_to_dict(scene: SceneSpec) -> dict:
    objs = []
    for o in scene.objects:
        if isinstance(o.shape, Sphere):
            shape = {"kind": "sphere", "radius": o.shape.radius}
        else:
            shape = {"kind": "box", "half_extents": list(o.shape.half_extents)}
        objs.append(
            {
                "shape": shape,
                "center": list(o.center),
                "rotation": o.rotation,
                "material": material_to_dict(o.material),
            }
        )
    return {
        "scene_id": scene.scene_id,
        "seed": scene.seed,
        "objects": objs,
        "light": {
            "direction": list(scene.light.direction),
            "intensity": scene.light.intensity,
            "ambient": scene.light.ambient,
        },
        "ground": None
        if scene.ground is None
        else {"height": scene.ground.height, "material": material_to_dict(scene.ground.material)},
        "background_color": list(scene.background_color),
    }


def scene_from_dict(d: dict) -> SceneSpec:
    objs = []
    for i, o in enumerate(d["objects"]):
        s = o["shape"]
        shape = Sphere(float(s["radius"])) if s["kind"] == "sphere" else Box(tuple(s["half_extents"]))
        objs.append(
            SceneObject(shape, tuple(o["center"]), float(o["rotation"]), material_from_dict(o["material"], f"objects[{i}]"))
        )
    g = d["ground"]
    return SceneSpec(
        scene_id=d["scene_id"],
        seed=d["seed"],
        objects=tuple(objs),
        light=DirectionalLight(tuple(d["light"]["direction"]), d["light"]["intensity"], d["light"]["ambient"]),
        ground=None if g is None else GroundPlane(g["height"], material_from_dict(g["material"])),
        background_color=tuple(d["background_color"]),
    )
