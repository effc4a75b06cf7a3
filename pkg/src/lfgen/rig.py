"""Planar camera array and pinhole geometry.

Camera space is x right, y up, z forward along the viewing axis. Pixel
rows grow downward, so ``py = cy - f * y / z``. A pose's ``orientation``
is the camera-to-world rotation whose columns are the camera's right, up
and forward axes in world coordinates.

Grid layout: increasing ``u_index`` moves the camera toward screen-right,
increasing ``v_index`` moves it down. Poses are listed row-major, v outer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lfgen.errors import BehindCameraError, ConfigError

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]

IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class JitterParams:
    seed: int = 0
    translation_sigma: float = 0.0
    rotation_sigma: float = 0.0


@dataclass(frozen=True)
class RigConfig:
    nu: int = 5
    nv: int = 5
    baseline_u: float = 0.2
    baseline_v: float = 0.2
    width: int = 512
    height: int = 512
    vfov: float = math.radians(60.0)
    jitter: JitterParams | None = None
    rig_center: Vec3 = (0.0, 0.0, 0.0)
    look_axis: Vec3 = (0.0, 0.0, 1.0)
    focus_distance: float = 5.0

    @property
    def f_px(self) -> float:
        return self.height / (2.0 * math.tan(self.vfov / 2.0))

    @property
    def reference_index(self) -> tuple[int, int]:
        """(u, v) of the grid-center camera."""
        return self.nu // 2, self.nv // 2

    def validate(self, prefix="rig"):
        def bad(name, msg):
            raise ConfigError(f"{prefix}.{name}", msg)

        for name in ("nu", "nv", "width", "height"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                bad(name, "must be an integer >= 1")
        if (self.nu > 1 or self.nv > 1) and not (self.baseline_u > 0 and self.baseline_v > 0):
            bad("baseline_u" if not self.baseline_u > 0 else "baseline_v", "must be > 0 for a multi-camera rig")
        if not 0 < self.vfov < math.pi:
            bad("vfov", "must lie in (0, pi) radians")
        if not self.focus_distance > 0:
            bad("focus_distance", "must be > 0")
        for name in ("rig_center", "look_axis"):
            v = getattr(self, name)
            if len(v) != 3 or not all(math.isfinite(c) for c in v):
                bad(name, "must be three finite numbers")
        if math.sqrt(sum(c * c for c in self.look_axis)) == 0:
            bad("look_axis", "must be non-zero")
        if self.jitter is not None:
            if self.jitter.translation_sigma < 0:
                bad("jitter.translation_sigma", "must be >= 0")
            if self.jitter.rotation_sigma < 0:
                bad("jitter.rotation_sigma", "must be >= 0")
            if not 0 <= self.jitter.seed < 2**64:
                bad("jitter.seed", "must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CameraPose:
    u_index: int
    v_index: int
    position: Vec3
    orientation: Mat3
    f_px: float
    cx: float
    cy: float
    width: int
    height: int

    @property
    def rotation(self) -> np.ndarray:
        return np.array(self.orientation, dtype=np.float64)

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class TwoPlaneParam:
    uv_origin: Vec3
    uv_du: Vec3
    uv_dv: Vec3
    st_distance: float


def base_orientation(look_axis) -> np.ndarray:
    """Camera-to-world rotation for a camera looking along ``look_axis`` with world +y up."""
    f = np.asarray(look_axis, dtype=np.float64)
    f = f / np.linalg.norm(f)
    if f[0] == 0.0 and f[1] == 0.0 and f[2] > 0:
        return np.eye(3)
    up = np.array([0.0, 1.0, 0.0])
    if abs(float(f @ up)) > 1.0 - 1e-12:
        up = np.array([0.0, 0.0, 1.0])
    r = np.cross(up, f)
    r /= np.linalg.norm(r)
    u = np.cross(f, r)
    return np.stack([r, u, f], axis=1)


def _rodrigues(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    if theta == 0.0:
        return np.eye(3)
    k = w / theta
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def _gaussians(seed: int, index: int, n: int) -> list[float]:
    """``n`` standard normals via Box-Muller on PCG64 uniform doubles."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))
    out = []
    while len(out) < n:
        u1 = 1.0 - float(rng.random())  # (0, 1]
        u2 = float(rng.random())
        r = math.sqrt(-2.0 * math.log(u1))
        out.extend((r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)))
    return out[:n]


def _as_tuple3(a) -> Vec3:
    return (float(a[0]), float(a[1]), float(a[2]))


def build_rig(config: RigConfig) -> list[CameraPose]:
    """All poses of the rig, row-major with v outer and u inner."""
    config.validate()
    R0 = base_orientation(config.look_axis)
    right, up = R0[:, 0], R0[:, 1]
    center = np.asarray(config.rig_center, dtype=np.float64)
    u0 = (config.nu - 1) / 2.0
    v0 = (config.nv - 1) / 2.0
    f = config.f_px
    cx, cy = config.width / 2.0, config.height / 2.0
    jitter = config.jitter

    poses = []
    for v in range(config.nv):
        for u in range(config.nu):
            du = (u - u0) * config.baseline_u
            dv = -(v - v0) * config.baseline_v
            pos = center + du * right + dv * up
            R = R0
            if jitter is not None:
                g = _gaussians(jitter.seed, v * config.nu + u, 6)
                pos = pos + jitter.translation_sigma * np.array(g[:3])
                R = R0 @ _rodrigues(jitter.rotation_sigma * np.array(g[3:]))
            poses.append(
                CameraPose(
                    u_index=u,
                    v_index=v,
                    position=_as_tuple3(pos),
                    orientation=tuple(_as_tuple3(row) for row in R),
                    f_px=f,
                    cx=cx,
                    cy=cy,
                    width=config.width,
                    height=config.height,
                )
            )
    return poses


def two_plane(config: RigConfig) -> TwoPlaneParam:
    R0 = base_orientation(config.look_axis)
    return TwoPlaneParam(
        uv_origin=_as_tuple3(config.rig_center),
        uv_du=_as_tuple3(R0[:, 0] * config.baseline_u),
        uv_dv=_as_tuple3(-R0[:, 1] * config.baseline_v),
        st_distance=config.focus_distance,
    )


def ray_to_uvst(param: TwoPlaneParam, origin, direction) -> tuple[float, float, float, float]:
    """Two-plane coordinates of a ray.

    (u, v) is where the ray crosses the camera plane, in baseline steps from
    ``uv_origin``; (s, t) is where it crosses the parallel plane
    ``st_distance`` ahead, in the same in-plane units.
    """
    o = np.asarray(param.uv_origin)
    du = np.asarray(param.uv_du)
    dv = np.asarray(param.uv_dv)
    n = np.cross(du, dv)
    n /= np.linalg.norm(n)
    if float(n @ np.asarray(direction)) < 0:
        n = -n
    p = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    denom = float(d @ n)
    if denom == 0:
        raise ValueError("ray is parallel to the two planes")
    basis = np.stack([du, dv], axis=1)

    def plane_coords(offset):
        t = float((o + offset * n - p) @ n) / denom
        hit = p + t * d - (o + offset * n)
        return np.linalg.lstsq(basis, hit, rcond=None)[0]

    u, v = plane_coords(0.0)
    s, t = plane_coords(param.st_distance)
    return float(u), float(v), float(s), float(t)


def ray_directions(pose: CameraPose, px, py) -> np.ndarray:
    """Unit world-space directions through pixel centers; ``px``/``py`` broadcast."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    xc = (px + 0.5 - pose.cx) / pose.f_px
    yc = -(py + 0.5 - pose.cy) / pose.f_px
    R = pose.rotation
    d = np.empty(np.broadcast(xc, yc).shape + (3,))
    for i in range(3):
        d[..., i] = xc * R[i, 0] + yc * R[i, 1] + R[i, 2]
    norm = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])
    return d / norm[..., None]


def pixel_rays(pose: CameraPose, rows: slice | None = None) -> np.ndarray:
    """Directions for every pixel (or a band of rows), shape (rows, width, 3)."""
    ys = np.arange(pose.height)[rows if rows is not None else slice(None)]
    xs = np.arange(pose.width)
    return ray_directions(pose, xs[None, :], ys[:, None])


def camera_ray(pose: CameraPose, px: int, py: int) -> tuple[np.ndarray, np.ndarray]:
    """Origin and unit direction of the ray through the center of pixel (px, py)."""
    if not (0 <= px < pose.width and 0 <= py < pose.height):
        raise IndexError(f"pixel ({px}, {py}) outside {pose.width}x{pose.height} image")
    return np.array(pose.position), ray_directions(pose, px, py)


def project(pose: CameraPose, point) -> tuple[float, float, float]:
    """Subpixel image coordinates and camera-space depth of a world point."""
    rel = np.asarray(point, dtype=np.float64) - np.asarray(pose.position)
    cam = pose.rotation.T @ rel
    z = float(cam[2])
    if z <= 0:
        raise BehindCameraError(f"point {tuple(point)} is behind the camera (z={z})")
    px = pose.cx + pose.f_px * float(cam[0]) / z
    py = pose.cy - pose.f_px * float(cam[1]) / z
    return px, py, z


def depth_to_disparity(z, f_px: float, baseline: float):
    """Pixel shift between neighbouring parallel cameras for depth ``z``.

    Accepts scalars or arrays; infinite depth maps to zero disparity.
    """
    if not f_px > 0 or not baseline >= 0:
        raise ValueError("need f_px > 0 and baseline >= 0")
    z_arr = np.asarray(z, dtype=np.float64)
    if np.any(~(z_arr > 0)):
        raise ValueError("depth must be > 0")
    out = f_px * baseline / z_arr
    return float(out) if out.ndim == 0 else out
