"""Synthetic 4D light field dataset generator.

Seeded procedural scenes are ray traced from a planar camera grid into
RGB + ground-truth depth views and written out with a reproducibility
manifest.
"""

__version__ = "0.1.0"

from lfgen.errors import ConfigError, DatasetIOError, LfgenError
from lfgen.scene import GenParams, SceneSpec, regenerate, spawn_scene
from lfgen.rig import (
    CameraPose,
    JitterParams,
    RigConfig,
    build_rig,
    camera_ray,
    depth_to_disparity,
    project,
)
from lfgen.render import Frame, RenderSettings, intersect, render_view, shade
from lfgen.lightfield import (
    Epi,
    LightField,
    capture_lightfield,
    disparity_map,
    epi_disparity,
    extract_epi,
    focus_measure_variance,
    refocus,
)

__all__ = [
    "CameraPose",
    "ConfigError",
    "DatasetIOError",
    "Epi",
    "Frame",
    "GenParams",
    "JitterParams",
    "LfgenError",
    "LightField",
    "RenderSettings",
    "RigConfig",
    "SceneSpec",
    "build_rig",
    "camera_ray",
    "capture_lightfield",
    "depth_to_disparity",
    "disparity_map",
    "epi_disparity",
    "extract_epi",
    "focus_measure_variance",
    "intersect",
    "project",
    "refocus",
    "regenerate",
    "render_view",
    "shade",
    "spawn_scene",
]
