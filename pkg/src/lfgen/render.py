"""Per-pixel ray tracer producing RGB + camera-space depth.

All per-pixel arithmetic is elementwise numpy (no BLAS reductions), so a
pixel's value depends only on (scene, pose, settings, pixel) and not on
how rows are split between workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from lfgen.rig import CameraPose, pixel_rays
from lfgen.scene import Checker, DirectionalLight, GroundPlane, Material, SceneObject, SceneSpec, Sphere

EPS = 1e-4
BAND_ROWS = 64


@dataclass(frozen=True)
class RenderSettings:
    shadows: bool = True
    ambient_override: float | None = None
    max_depth_clip: float | None = None  # visualization only

    def validate(self, prefix="render"):
        from lfgen.errors import ConfigError

        if self.max_depth_clip is not None and not self.max_depth_clip > 0:
            raise ConfigError(f"{prefix}.max_depth_clip", "must be > 0")
        if self.ambient_override is not None and not 0 <= self.ambient_override <= 1:
            raise ConfigError(f"{prefix}.ambient_override", "must lie in [0, 1]")


@dataclass(eq=False)
class Frame:
    """One rendered view. ``rgb`` is (H, W, 3) linear RGB, ``depth`` is (H, W) with +inf on miss."""

    width: int
    height: int
    rgb: np.ndarray
    depth: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.rgb, other.rgb)
            and np.array_equal(self.depth, other.depth)
        )

    def depth_for_display(self, clip):
        d = np.where(np.isfinite(self.depth), self.depth, clip)
        return np.minimum(d, clip) / clip


def _dot(a, b):
    """Dot product over the leading axis; rays are stored as (3, N) arrays."""
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _col(v, like):
    return v[:, None] if np.ndim(like) == 2 else v


class _Prim:
    """A scene object with its per-object constants precomputed."""

    def __init__(self, obj: SceneObject):
        self.obj = obj
        self.center = np.array(obj.center, dtype=np.float64)
        self.material = obj.material
        self.bound = obj.bounding_radius() * (1.0 + 1e-7) + 1e-9
        if isinstance(obj.shape, Sphere):
            self.kind = "sphere"
            self.radius = float(obj.shape.radius)
        else:
            self.kind = "box"
            self.half = np.array(obj.shape.half_extents, dtype=np.float64)
            self.cos = math.cos(obj.rotation)
            self.sin = math.sin(obj.rotation)

    # world <-> local for the box's rotation about +y
    def _rot(self, v, sin):
        return np.stack([self.cos * v[0] - sin * v[2], v[1], sin * v[0] + self.cos * v[2]])

    def to_local(self, v, point=True):
        if point:
            v = v - _col(self.center, v)
        return self._rot(v, self.sin)

    def to_world_dir(self, v):
        return self._rot(v, -self.sin)

    def hit(self, o, d):
        """Nearest t > EPS per ray, +inf on miss. ``o`` is (3,) or (3, N); ``d`` is (3, N)."""
        if self.kind == "sphere":
            return _hit_sphere(o, d, self.center, self.radius)
        return _hit_box(self.to_local(o), self.to_local(d, point=False), self.half)

    def surface(self, p):
        """Outward unit normals and two tangent coordinates at hit points ``p`` (3, M)."""
        if self.kind == "sphere":
            rel = p - self.center[:, None]
            n = rel / self.radius
            a = self.radius * np.arctan2(rel[2], rel[0])
            b = self.radius * np.arcsin(np.clip(rel[1] / self.radius, -1.0, 1.0))
            return n, a, b
        lp = self.to_local(p)
        ratio = np.abs(lp) / self.half[:, None]
        axis = np.argmax(ratio, axis=0)
        cols = np.arange(lp.shape[1])
        nl = np.zeros_like(lp)
        nl[axis, cols] = np.where(lp[axis, cols] >= 0, 1.0, -1.0)
        # tangent coordinates: the two local components other than the normal axis
        first = np.where(axis == 0, 1, 0)
        second = np.where(axis == 2, 1, 2)
        return self.to_world_dir(nl), lp[first, cols], lp[second, cols]


def _hit_sphere(o, d, center, radius):
    oc = o - _col(center, o)
    b = _dot(oc, d)
    c = _dot(oc, oc) - radius * radius
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        sq = np.sqrt(disc)
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > EPS, t0, np.where(t1 > EPS, t1, np.inf))
    return np.where(disc >= 0, t, np.inf)


def _hit_box(o, d, half):
    tmin = np.full(d.shape[1:], -np.inf)
    tmax = np.full(d.shape[1:], np.inf)
    for i in range(3):
        di = d[i]
        inv = 1.0 / np.where(di == 0.0, 1e-300, di)
        with np.errstate(over="ignore", invalid="ignore"):
            t1 = (-half[i] - o[i]) * inv
            t2 = (half[i] - o[i]) * inv
        tmin = np.maximum(tmin, np.minimum(t1, t2))
        tmax = np.minimum(tmax, np.maximum(t1, t2))
    t = np.where(tmin > EPS, tmin, np.where(tmax > EPS, tmax, np.inf))
    return np.where(tmin <= tmax, t, np.inf)


def _hit_ground(o, d, height):
    dy = d[1]
    safe = np.where(dy == 0.0, 1.0, dy)
    t = (height - o[1]) / safe
    return np.where((dy != 0.0) & (t > EPS), t, np.inf)


def _ground_surface(p, d):
    n = np.zeros_like(p)
    n[1] = np.where(d[1] > 0, -1.0, 1.0)
    return n, p[0], p[2]


def _albedo(material: Material, a, b):
    """(3, M) surface colour for tangent coordinates ``a``, ``b``."""
    if isinstance(material, Checker):
        cs = material.cell_size
        even = (np.floor(a / cs) + np.floor(b / cs)) % 2 == 0
        return np.where(even, np.array(material.rgb_a)[:, None], np.array(material.rgb_b)[:, None])
    return np.broadcast_to(np.array(material.rgb, dtype=np.float64)[:, None], (3,) + a.shape)


def _lambert(albedo, normal, light_dir, intensity, ambient, blocked):
    ndotl = np.maximum(0.0, -_dot(normal, np.asarray(light_dir, dtype=np.float64)))
    direct = np.where(blocked, 0.0, intensity * ndotl)
    return np.clip(albedo * (ambient + direct), 0.0, 1.0)


def intersect(ray, obj: SceneObject | GroundPlane):
    """Nearest hit of ``ray = (origin, unit direction)`` with one primitive.

    Returns ``(t, normal)`` for the smallest ``t > 1e-4`` or ``None``. The
    normal is the outward surface normal (the ground normal faces the ray).
    """
    o = np.asarray(ray[0], dtype=np.float64)
    d = np.asarray(ray[1], dtype=np.float64).reshape(3, 1)
    if isinstance(obj, GroundPlane):
        t = float(_hit_ground(o, d, obj.height)[0])
        if not math.isfinite(t):
            return None
        n, _, _ = _ground_surface(o[:, None] + t * d, d)
        return t, n[:, 0]
    prim = _Prim(obj)
    t = float(prim.hit(o, d)[0])
    if not math.isfinite(t):
        return None
    n, _, _ = prim.surface(o[:, None] + t * d)
    return t, n[:, 0]


def shade(hit_point, normal, material: Material, light: DirectionalLight, shadow_blocked: bool, surface_coords=None, ambient=None):
    """Lambertian colour of one surface point, clamped to [0, 1].

    ``surface_coords`` are the two tangent coordinates used by checker
    materials; when omitted they are the two world coordinates orthogonal to
    the normal's dominant axis.
    """
    p = np.asarray(hit_point, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    if surface_coords is None:
        axis = int(np.argmax(np.abs(n)))
        others = [i for i in range(3) if i != axis]
        surface_coords = (p[others[0]], p[others[1]])
    a = np.array([surface_coords[0]], dtype=np.float64)
    b = np.array([surface_coords[1]], dtype=np.float64)
    amb = light.ambient if ambient is None else ambient
    rgb = _lambert(_albedo(material, a, b), n.reshape(3, 1), light.direction, light.intensity, amb, np.array([shadow_blocked]))
    return rgb[:, 0]


def _tangent_range(a, z, r):
    """Slopes k = a/z of the two planes through the origin tangent to a sphere, or None if unbounded."""
    den = z * z - r * r
    if z <= r or den <= 0:
        return None
    root = r * math.sqrt(max(a * a + den, 0.0))
    return (a * z - root) / den, (a * z + root) / den


def _pixel_rect(prim: _Prim, pose: CameraPose, R):
    """Conservative pixel rectangle (x0, x1, y0, y1), end-exclusive, that can see ``prim``."""
    rel = prim.center - np.asarray(pose.position)
    cam = R.T @ rel
    x, y, z = float(cam[0]), float(cam[1]), float(cam[2])
    r = prim.bound
    if z + r <= 0:
        return None
    W, H = pose.width, pose.height
    kx = _tangent_range(x, z, r)
    ky = _tangent_range(y, z, r)
    if kx is None or ky is None:
        return 0, W, 0, H
    f = pose.f_px
    px_lo, px_hi = pose.cx + f * kx[0], pose.cx + f * kx[1]
    py_lo, py_hi = pose.cy - f * ky[1], pose.cy - f * ky[0]
    # pixel i is sampled at i + 0.5; pad by two pixels
    x0 = max(0, math.floor(px_lo - 0.5) - 2)
    x1 = min(W, math.ceil(px_hi - 0.5) + 3)
    y0 = max(0, math.floor(py_lo - 0.5) - 2)
    y1 = min(H, math.ceil(py_hi - 0.5) + 3)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, x1, y0, y1


class _PreparedScene:
    def __init__(self, scene: SceneSpec, pose: CameraPose):
        self.scene = scene
        self.prims = [_Prim(o) for o in scene.objects]
        self.ground = scene.ground
        self.background = np.array(scene.background_color, dtype=np.float64)
        R = pose.rotation
        self.rects = [_pixel_rect(p, pose, R) for p in self.prims]

    def nearest(self, o, d, rows: slice):
        """Nearest hit for a band of primary rays ``d`` of shape (3, h, W).

        Returns (t, index) rasters; index == len(prims) marks the ground, -1 a miss.
        """
        h, W = d.shape[1:]
        t_best = np.full((h, W), np.inf)
        idx = np.full((h, W), -1, dtype=np.int64)
        for k, (prim, rect) in enumerate(zip(self.prims, self.rects)):
            if rect is None:
                continue
            x0, x1, y0, y1 = rect
            y0 = max(y0, rows.start) - rows.start
            y1 = min(y1, rows.stop) - rows.start
            if y0 >= y1:
                continue
            sub = d[:, y0:y1, x0:x1].reshape(3, -1)
            t = prim.hit(o, sub).reshape(y1 - y0, x1 - x0)
            tb = t_best[y0:y1, x0:x1]
            better = t < tb
            tb[better] = t[better]
            idx[y0:y1, x0:x1][better] = k
        if self.ground is not None:
            t = _hit_ground(o, d, self.ground.height)
            better = t < t_best
            t_best[better] = t[better]
            idx[better] = len(self.prims)
        return t_best, idx

    def occluded(self, p, light_dir):
        """Whether the ray from each point (3, M) toward the light hits anything."""
        to_light = -np.asarray(light_dir, dtype=np.float64)
        e1 = np.cross(to_light, [0.0, 0.0, 1.0] if abs(to_light[2]) < 0.9 else [1.0, 0.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(to_light, e1)
        pa = _dot(p, e1)
        pb = _dot(p, e2)
        pl = _dot(p, to_light)
        order = np.argsort(pa, kind="stable")
        pa_sorted = pa[order]
        blocked = np.zeros(p.shape[1], dtype=bool)
        for prim in self.prims:
            c = prim.center
            ca, cb, cl = float(c @ e1), float(c @ e2), float(c @ to_light)
            r = prim.bound
            lo = np.searchsorted(pa_sorted, ca - r, side="left")
            hi = np.searchsorted(pa_sorted, ca + r, side="right")
            if lo >= hi:
                continue
            cand = order[lo:hi]
            da = pa[cand] - ca
            db = pb[cand] - cb
            keep = (da * da + db * db <= r * r) & (cl - pl[cand] + r > EPS) & ~blocked[cand]
            sel = cand[keep]
            if sel.size == 0:
                continue
            t = prim.hit(p[:, sel], np.broadcast_to(to_light[:, None], (3, sel.size)))
            blocked[sel[np.isfinite(t)]] = True
        if self.ground is not None:
            blocked |= np.isfinite(_hit_ground(p, np.broadcast_to(to_light[:, None], p.shape), self.ground.height))
        return blocked

    def trace(self, origin, dirs, rows, forward, settings: RenderSettings):
        """Shade a band of primary rays sharing ``origin``; returns (rgb (3, N), depth (N,))."""
        light = self.scene.light
        ambient = light.ambient if settings.ambient_override is None else settings.ambient_override
        t, idx = self.nearest(origin, dirs, rows)
        t = t.reshape(-1)
        idx = idx.reshape(-1)
        dirs = dirs.reshape(3, -1)
        n = dirs.shape[1]
        rgb = np.broadcast_to(self.background[:, None], (3, n)).copy()
        depth = np.full(n, np.inf)
        hit = np.nonzero(idx >= 0)[0]
        if hit.size == 0:
            return rgb, depth
        d_hit = dirs[:, hit]
        t_hit = t[hit]
        p = origin[:, None] + t_hit * d_hit
        depth[hit] = t_hit * _dot(d_hit, forward)

        normals = np.empty_like(p)
        albedo = np.empty_like(p)
        kinds = idx[hit]
        for k in np.unique(kinds):
            m = kinds == k
            if k == len(self.prims):
                nk, a, b = _ground_surface(p[:, m], d_hit[:, m])
                mat = self.ground.material
            else:
                prim = self.prims[k]
                nk, a, b = prim.surface(p[:, m])
                mat = prim.material
            normals[:, m] = nk
            albedo[:, m] = _albedo(mat, a, b)

        blocked = np.zeros(hit.size, dtype=bool)
        if settings.shadows and light.intensity > 0:
            facing = np.nonzero(-_dot(normals, np.asarray(light.direction)) > 0)[0]
            if facing.size:
                blocked[facing] = self.occluded(p[:, facing], light.direction)
        rgb[:, hit] = _lambert(albedo, normals, light.direction, light.intensity, ambient, blocked)
        return rgb, depth


def render_view(scene: SceneSpec, pose: CameraPose, settings: RenderSettings | None = None, workers: int = 1) -> Frame:
    """Ray trace one view. Output is bit-identical for any ``workers``."""
    settings = RenderSettings() if settings is None else settings
    prepared = _PreparedScene(scene, pose)
    origin = np.array(pose.position, dtype=np.float64)
    forward = pose.forward
    W, H = pose.width, pose.height
    bands = [slice(r, min(r + BAND_ROWS, H)) for r in range(0, H, BAND_ROWS)]

    def run(band):
        dirs = np.ascontiguousarray(np.moveaxis(pixel_rays(pose, band), -1, 0))
        return prepared.trace(origin, dirs, band, forward, settings)

    if workers > 1 and len(bands) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, bands))
    else:
        results = [run(b) for b in bands]

    rgb = np.empty((H, W, 3))
    depth = np.empty((H, W))
    for band, (c, z) in zip(bands, results):
        rgb[band] = c.T.reshape(-1, W, 3)
        depth[band] = z.reshape(-1, W)
    return Frame(W, H, rgb, depth)
