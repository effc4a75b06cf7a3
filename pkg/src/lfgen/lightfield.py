"""4D light field assembly and the validation math built on it.

A :class:`LightField` stores L(u, v, s, t) as a row-major grid of rendered
views: ``views[v * nu + u]`` is camera (u, v), and within a view ``s`` is
the pixel column and ``t`` the pixel row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lfgen.render import Frame, RenderSettings, render_view
from lfgen.rig import CameraPose, RigConfig, build_rig, depth_to_disparity
from lfgen.scene import SceneSpec

LUMA = np.array([0.2126, 0.7152, 0.0722])


@dataclass(eq=False)
class LightField:
    nu: int
    nv: int
    width: int
    height: int
    views: list[Frame]
    rig: RigConfig
    poses: list[CameraPose]
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.views) != self.nu * self.nv:
            raise ValueError(f"expected {self.nu * self.nv} views, got {len(self.views)}")
        for f in self.views:
            if (f.width, f.height) != (self.width, self.height):
                raise ValueError("all views must share one resolution")
        r = self.rig
        if (r.nu, r.nv, r.width, r.height) != (self.nu, self.nv, self.width, self.height):
            raise ValueError("rig dimensions disagree with the light field")

    def view(self, u: int, v: int) -> Frame:
        self._check_uv(u, v)
        return self.views[v * self.nu + u]

    def _check_uv(self, u, v):
        if not (0 <= u < self.nu and 0 <= v < self.nv):
            raise IndexError(f"view ({u}, {v}) outside {self.nu}x{self.nv} grid")

    def rgb_array(self) -> np.ndarray:
        """L as a dense array of shape (nv, nu, height, width, 3)."""
        return np.stack([f.rgb for f in self.views]).reshape(self.nv, self.nu, self.height, self.width, 3)


@dataclass(eq=False)
class Epi:
    fixed_v: int
    fixed_t: int
    data: np.ndarray  # (nu, width, 3)


def capture_lightfield(scene: SceneSpec, rig: RigConfig, settings: RenderSettings | None = None, workers: int = 1) -> LightField:
    poses = build_rig(rig)
    views = [render_view(scene, p, settings, workers=workers) for p in poses]
    return LightField(rig.nu, rig.nv, rig.width, rig.height, views, rig, poses, tuple(scene.background_color))


def extract_epi(lf: LightField, v_index: int, t_row: int) -> Epi:
    """Stack row ``t_row`` of every view in camera row ``v_index``."""
    lf._check_uv(0, v_index)
    if not 0 <= t_row < lf.height:
        raise IndexError(f"row {t_row} outside image of height {lf.height}")
    data = np.stack([lf.view(u, v_index).rgb[t_row] for u in range(lf.nu)])
    return Epi(v_index, t_row, data)


def _shifted(img, sx, sy):
    """Bilinear sample of ``img`` at (x + sx, y + sy) for every pixel, plus a validity mask."""
    H, W = img.shape[:2]
    X = np.arange(W) + sx
    Y = np.arange(H) + sy
    vx = (X >= 0) & (X <= W - 1)
    vy = (Y >= 0) & (Y <= H - 1)
    x0 = np.clip(np.floor(X).astype(np.int64), 0, W - 1)
    y0 = np.clip(np.floor(Y).astype(np.int64), 0, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (X - np.floor(X))[None, :, None]
    fy = (Y - np.floor(Y))[:, None, None]
    # a + f * (b - a) returns a exactly when a == b
    a = img[np.ix_(y0, x0)]
    top = a + fx * (img[np.ix_(y0, x1)] - a)
    b = img[np.ix_(y1, x0)]
    bot = b + fx * (img[np.ix_(y1, x1)] - b)
    out = top + fy * (bot - top)
    return out, vy[:, None] & vx[None, :]


def refocus(lf: LightField, d: float) -> np.ndarray:
    """Shift-and-add synthetic aperture image focused at disparity ``d``.

    ``d`` is in pixels per horizontal camera step; vertical shifts are
    scaled by ``baseline_v / baseline_u``. Each view (u, v) is sampled at
    ``(s - d*(u - u0), t - d_v*(v - v0))`` about the grid center so that
    content at disparity ``d`` lines up. Samples falling outside a view are
    left out of that pixel's mean.
    """
    u0 = (lf.nu - 1) / 2.0
    v0 = (lf.nv - 1) / 2.0
    ratio = lf.rig.baseline_v / lf.rig.baseline_u if lf.rig.baseline_u > 0 else 1.0
    mean = np.zeros((lf.height, lf.width, 3))
    count = np.zeros((lf.height, lf.width, 1))
    for v in range(lf.nv):
        for u in range(lf.nu):
            sx = -d * (u - u0)
            sy = -d * ratio * (v - v0)
            sample, valid = _shifted(lf.view(u, v).rgb, sx, sy)
            valid = valid[..., None]
            count += valid
            # running mean: stays exact when every sample is identical
            step = np.divide(sample - mean, count, out=np.zeros_like(mean), where=count > 0)
            mean = np.where(valid, mean + step, mean)
    return np.where(count > 0, mean, np.asarray(lf.background, dtype=np.float64))


def luminance(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image[..., 0] * LUMA[0] + image[..., 1] * LUMA[1] + image[..., 2] * LUMA[2]


def focus_measure_variance(image: np.ndarray) -> float:
    """Population variance of Rec.709 luminance over the whole image."""
    image = np.asarray(image)
    if image.size == 0:
        raise ValueError("focus measure of an empty image")
    lum = luminance(image)
    # shifting by one sample keeps a constant image at exactly zero
    return float(np.var(lum - lum.flat[0]))


def disparity_map(lf: LightField, u_index: int, v_index: int) -> np.ndarray:
    """Ground-truth disparity (px per horizontal camera step) of one view; 0 where nothing was hit."""
    frame = lf.view(u_index, v_index)
    return depth_to_disparity(frame.depth, lf.rig.f_px, lf.rig.baseline_u)


def _ncc(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / den) if den > 0 else 0.0


def _row_shift_scores(row_a, row_b, shifts):
    """NCC of ``row_a[x + s]`` against ``row_b[x]`` for each integer shift."""
    W = row_a.shape[0]
    scores = []
    for s in shifts:
        if s >= 0:
            scores.append(_ncc(row_a[s:], row_b[: W - s]))
        else:
            scores.append(_ncc(row_a[: W + s], row_b[-s:]))
    return np.array(scores)


def _peak(shifts, scores):
    i = int(np.argmax(scores))
    if 0 < i < len(scores) - 1:
        l, c, r = scores[i - 1], scores[i], scores[i + 1]
        den = l - 2 * c + r
        if den < 0:
            return shifts[i] + 0.5 * (l - r) / den
    return float(shifts[i])


def epi_disparity(epi: Epi, max_shift: int | None = None) -> float:
    """Per-step disparity of the dominant EPI line family by cross-correlation.

    Neighbouring rows give a coarse estimate inside ``[-max_shift, max_shift]``
    (default an eighth of the width); the first and last rows
    then refine it over the full angular span. The EPI line slope is the
    negative of the returned value. Periodic texture is ambiguous beyond
    half its period, so ``max_shift`` should stay below that when known.
    """
    rows = luminance(epi.data)
    nu, W = rows.shape
    if nu < 2:
        raise ValueError("need at least two EPI rows")
    max_shift = W // 8 if max_shift is None else max_shift
    shifts = np.arange(-max_shift, max_shift + 1)
    total = sum(_row_shift_scores(rows[u], rows[u + 1], shifts) for u in range(nu - 1))
    # periodic texture correlates equally at d and d +/- period; favour the larger overlap
    total = total * (W - np.abs(shifts)) / W
    coarse = _peak(shifts, total)
    if nu == 2:
        return coarse
    span = nu - 1
    centre = int(round(coarse * span))
    half = max(2, int(np.ceil(abs(coarse) / 2)))
    fine = np.arange(centre - half, centre + half + 1)
    fine = fine[np.abs(fine) < W - 1]
    return _peak(fine, _row_shift_scores(rows[0], rows[-1], fine)) / span
