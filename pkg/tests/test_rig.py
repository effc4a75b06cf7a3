import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfgen.errors import BehindCameraError, ConfigError
from lfgen.rig import (
    IDENTITY,
    CameraPose,
    JitterParams,
    RigConfig,
    build_rig,
    camera_ray,
    depth_to_disparity,
    project,
    ray_to_uvst,
    two_plane,
)


def _pose(f=443.4, cx=256.0, cy=256.0, w=512, h=512, position=(0.0, 0.0, 0.0)):
    return CameraPose(0, 0, position, IDENTITY, f, cx, cy, w, h)


def test_three_by_three_grid_spacing():
    poses = build_rig(RigConfig(nu=3, nv=3, baseline_u=0.2, baseline_v=0.2))
    assert len(poses) == 9
    for v in range(3):
        row = poses[v * 3 : v * 3 + 3]
        for a, b in zip(row, row[1:]):
            assert np.linalg.norm(np.subtract(b.position, a.position)) == pytest.approx(0.2, abs=1e-12)


def test_single_camera_sits_at_rig_center():
    (pose,) = build_rig(RigConfig(nu=1, nv=1, rig_center=(1.0, 2.0, 3.0)))
    assert pose.position == (1.0, 2.0, 3.0)
    assert pose.orientation == IDENTITY


def test_grid_is_centered_and_ordered():
    cfg = RigConfig(nu=4, nv=3, baseline_u=0.5, baseline_v=0.25)
    poses = build_rig(cfg)
    for i, p in enumerate(poses):
        assert i == p.v_index * cfg.nu + p.u_index
    assert np.mean([p.position for p in poses], axis=0) == pytest.approx([0, 0, 0], abs=1e-12)


def test_u_moves_right_and_v_moves_down():
    poses = build_rig(RigConfig(nu=3, nv=3))
    assert poses[1].position[0] > poses[0].position[0]
    assert poses[3].position[1] < poses[0].position[1]


def test_focal_length_matches_vfov():
    for vfov in (0.3, math.radians(60), 2.5):
        cfg = RigConfig(nu=1, nv=1, height=480, width=640, vfov=vfov)
        (p,) = build_rig(cfg)
        assert abs(p.f_px - 480 / (2 * math.tan(vfov / 2))) < 1e-9


def test_jitter_is_deterministic_and_zero_sigma_is_exact():
    jit = RigConfig(nu=3, nv=3, jitter=JitterParams(seed=5, translation_sigma=0.01, rotation_sigma=0.002))
    assert build_rig(jit) == build_rig(jit)
    assert build_rig(jit) != build_rig(RigConfig(nu=3, nv=3))
    zero = RigConfig(nu=3, nv=3, jitter=JitterParams(seed=5))
    assert build_rig(zero) == build_rig(RigConfig(nu=3, nv=3))


def test_jittered_orientation_stays_a_rotation():
    cfg = RigConfig(nu=2, nv=2, jitter=JitterParams(seed=1, translation_sigma=0.05, rotation_sigma=0.05))
    for p in build_rig(cfg):
        R = p.rotation
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_unjittered_rig_is_planar_with_shared_orientation():
    cfg = RigConfig(nu=5, nv=4, look_axis=(0.3, 0.1, 1.0), rig_center=(1.0, -2.0, 0.5))
    poses = build_rig(cfg)
    axis = np.array(cfg.look_axis) / np.linalg.norm(cfg.look_axis)
    offsets = [float(np.dot(np.subtract(p.position, cfg.rig_center), axis)) for p in poses]
    assert max(abs(o) for o in offsets) < 1e-9
    assert len({p.orientation for p in poses}) == 1
    assert np.allclose(poses[0].forward, axis, atol=1e-12)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"nu": 0}, "rig.nu"),
        ({"nv": -2}, "rig.nv"),
        ({"nu": 2, "baseline_u": 0.0}, "rig.baseline_u"),
        ({"vfov": math.pi}, "rig.vfov"),
        ({"width": 0}, "rig.width"),
        ({"jitter": JitterParams(translation_sigma=-1.0)}, "rig.jitter.translation_sigma"),
    ],
)
def test_invalid_rig_names_the_field(kwargs, field):
    with pytest.raises(ConfigError) as err:
        build_rig(RigConfig(**kwargs))
    assert err.value.field == field


def test_center_ray_of_odd_image_is_the_look_axis():
    (p,) = build_rig(RigConfig(nu=1, nv=1, width=513, height=513))
    origin, d = camera_ray(p, 256, 256)
    assert origin.tolist() == [0.0, 0.0, 0.0]
    assert d.tolist() == [0.0, 0.0, 1.0]


def test_ray_directions_are_unit():
    (p,) = build_rig(RigConfig(nu=1, nv=1, width=320, height=200))
    rng = np.random.default_rng(0)
    for px, py in zip(rng.integers(0, 320, 100), rng.integers(0, 200, 100)):
        _, d = camera_ray(p, int(px), int(py))
        assert abs(np.linalg.norm(d) - 1.0) < 1e-12


def test_out_of_range_pixel_is_rejected():
    (p,) = build_rig(RigConfig(nu=1, nv=1, width=10, height=10))
    with pytest.raises(IndexError):
        camera_ray(p, 10, 0)
    with pytest.raises(IndexError):
        camera_ray(p, 0, -1)


@settings(max_examples=100, deadline=None)
@given(
    px=st.integers(0, 127),
    py=st.integers(0, 95),
    t=st.floats(0.1, 100.0),
    jseed=st.integers(0, 1000),
)
def test_camera_ray_and_project_round_trip(px, py, t, jseed):
    cfg = RigConfig(nu=2, nv=2, width=128, height=96, jitter=JitterParams(jseed, 0.05, 0.02))
    pose = build_rig(cfg)[3]
    o, d = camera_ray(pose, px, py)
    x, y, z = project(pose, o + t * d)
    assert x == pytest.approx(px + 0.5, abs=1e-6)
    assert y == pytest.approx(py + 0.5, abs=1e-6)
    assert z > 0


def test_project_axis_point():
    assert project(_pose(), (0.0, 0.0, 5.0)) == (256.0, 256.0, 5.0)


def test_project_matches_hand_computed_pinhole():
    # 256 + 443.4 * 1 / 5
    px, py, z = project(_pose(), (1.0, 0.0, 5.0))
    assert px == pytest.approx(344.68, abs=1e-9)
    assert py == 256.0 and z == 5.0


def test_project_behind_camera_raises():
    with pytest.raises(BehindCameraError):
        project(_pose(), (0.0, 0.0, -1.0))
    with pytest.raises(BehindCameraError):
        project(_pose(), (1.0, 0.0, 0.0))


def test_depth_is_along_axis_not_euclidean():
    _, _, z = project(_pose(), (3.0, 4.0, 5.0))
    assert z == 5.0


def test_disparity_examples():
    # f_px = 256 / tan(30 deg) ~ 443.40 for a 512 px, 60 deg camera
    assert depth_to_disparity(5.0, 443.40, 0.2) == pytest.approx(17.736, abs=1e-9)
    assert depth_to_disparity(math.inf, 443.40, 0.2) == 0.0
    assert depth_to_disparity(10.0, 443.40, 0.2) == pytest.approx(depth_to_disparity(5.0, 443.40, 0.2) / 2)
    assert RigConfig(width=512, height=512).f_px == pytest.approx(256 / math.tan(math.radians(30)), abs=1e-9)


def test_disparity_domain():
    with pytest.raises(ValueError):
        depth_to_disparity(0.0, 443.4, 0.2)
    with pytest.raises(ValueError):
        depth_to_disparity(-1.0, 443.4, 0.2)
    with pytest.raises(ValueError):
        depth_to_disparity(np.array([1.0, np.nan]), 443.4, 0.2)


def test_projected_point_moves_left_and_up_across_the_grid():
    poses = build_rig(RigConfig(nu=3, nv=3, width=256, height=256))
    point = (0.1, -0.2, 5.0)
    grid = {(p.u_index, p.v_index): project(p, point) for p in poses}
    for v in range(3):
        xs = [grid[(u, v)][0] for u in range(3)]
        assert xs[0] > xs[1] > xs[2]
    for u in range(3):
        ys = [grid[(u, v)][1] for v in range(3)]
        assert ys[0] > ys[1] > ys[2]


def test_projection_shift_equals_disparity():
    cfg = RigConfig(nu=3, nv=1, width=512, height=512, baseline_u=0.2)
    poses = build_rig(cfg)
    a, b = project(poses[0], (0, 0, 5.0)), project(poses[1], (0, 0, 5.0))
    assert a[0] - b[0] == pytest.approx(depth_to_disparity(5.0, cfg.f_px, 0.2), abs=1e-9)


def test_two_plane_coordinates():
    cfg = RigConfig(nu=3, nv=3, baseline_u=0.2, baseline_v=0.2, focus_distance=5.0)
    param = two_plane(cfg)
    assert param.st_distance == 5.0
    # a ray from camera (u=+1 step, v=-1 step) straight ahead
    origin = (0.2, 0.2, 0.0)
    u, v, s, t = ray_to_uvst(param, origin, (0.0, 0.0, 1.0))
    assert (u, v) == pytest.approx((1.0, -1.0))
    assert (s, t) == pytest.approx((1.0, -1.0))
    u, v, s, t = ray_to_uvst(param, (0.0, 0.0, 0.0), np.array([0.2, 0.0, 5.0]) / np.linalg.norm([0.2, 0, 5.0]))
    assert (u, v, s, t) == pytest.approx((0.0, 0.0, 1.0, 0.0))
