import math

import pytest

from lfgen.config import RunConfig
from lfgen.render import RenderSettings
from lfgen.rig import RigConfig
from lfgen.scene import Box, Checker, DirectionalLight, GenParams, SceneObject, SceneSpec, Solid, Sphere

SKY = (0.5, 0.6, 0.7)


def scene_of(*objects, ground=None, light=None, background=SKY):
    light = light or DirectionalLight((0.0, 0.0, 1.0), 1.0, 0.1)
    return SceneSpec(0, 0, tuple(objects), light, ground, background)


def sphere(center, radius, rgb=(0.8, 0.2, 0.2)):
    return SceneObject(Sphere(radius), tuple(center), 0.0, Solid(rgb))


def checker_plane(z, cell=1.0):
    """Large fronto-parallel checkered slab whose front face sits at depth ``z``."""
    return SceneObject(Box((20.0, 20.0, 0.01)), (0.0, 0.0, z + 0.01), 0.0, Checker((0.9, 0.9, 0.9), (0.1, 0.1, 0.1), cell))


NO_SHADOWS = RenderSettings(shadows=False)


def small_run(tmp_path, name="ds", **kw):
    rig = kw.pop("rig", RigConfig(nu=3, nv=3, width=48, height=40))
    gen = kw.pop("gen", GenParams(object_count=6))
    return RunConfig(seed=kw.pop("seed", 11), num_scenes=kw.pop("num_scenes", 2), gen=gen, rig=rig, output_dir=str(tmp_path / name), **kw)


@pytest.fixture
def rig512():
    return RigConfig(nu=3, nv=3, width=512, height=512, vfov=math.radians(60.0))
