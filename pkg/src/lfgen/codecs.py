"""Byte-level encoders/decoders for views and depth maps.

Colour: linear RGB in [0, 1] is stored as 8-bit with gamma 2.2 and
round-half-up. Depth: PFM (exact float32, +inf kept) or 16-bit PNG with an
explicit scale, where code 0 means "no hit" and finite depths are clamped
to codes 1..65535.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

GAMMA = 2.2
PNG_COMPRESS_LEVEL = 6


def linear_to_8bit(rgb: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    return np.floor(255.0 * v ** (1.0 / GAMMA) + 0.5).astype(np.uint8)


def _pil_bytes(img: Image.Image, fmt: str, **kw) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format=fmt, **kw)
    return buf.getvalue()


def write_image_png8(rgb: np.ndarray) -> bytes:
    return _pil_bytes(Image.fromarray(linear_to_8bit(rgb)), "PNG", compress_level=PNG_COMPRESS_LEVEL)


def write_image_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6, maxval 255."""
    codes = linear_to_8bit(rgb)
    h, w = codes.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + codes.tobytes()


def encode_uint8_png(codes: np.ndarray) -> bytes:
    """PNG of an already-quantized (H, W, 3) uint8 raster."""
    return _pil_bytes(Image.fromarray(np.asarray(codes, dtype=np.uint8)), "PNG", compress_level=PNG_COMPRESS_LEVEL)


def read_image(data: bytes) -> np.ndarray:
    """Decode a PNG or PPM into an (H, W, 3) uint8 array."""
    with Image.open(io.BytesIO(data)) as img:
        return np.array(img.convert("RGB"))


def image_size(data: bytes) -> tuple[int, int]:
    """(width, height) from the image header without decoding pixels."""
    with Image.open(io.BytesIO(data)) as img:
        return img.size


def write_depth_pfm(depth: np.ndarray) -> bytes:
    depth = np.asarray(depth)
    h, w = depth.shape
    header = b"Pf\n%d %d\n-1.0\n" % (w, h)
    return header + np.flipud(depth).astype("<f4").tobytes()


def read_pfm(data: bytes) -> np.ndarray:
    """Decode a PFM into float32, top row first; (H, W) for Pf, (H, W, 3) for PF."""
    fields = []
    pos = 0
    # magic, width, height, scale; a single whitespace byte precedes the pixels
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1
    magic, w, h, scale = fields[0], int(fields[1]), int(fields[2]), float(fields[3])
    if magic == "Pf":
        channels = 1
    elif magic == "PF":
        channels = 3
    else:
        raise ValueError(f"not a PFM file (magic {magic!r})")
    dtype = "<f4" if scale < 0 else ">f4"
    n = w * h * channels
    body = data[pos : pos + 4 * n]
    if len(body) != 4 * n:
        raise ValueError(f"truncated PFM: expected {4 * n} bytes of pixels, got {len(body)}")
    arr = np.frombuffer(body, dtype=dtype).astype(np.float32)
    arr = arr.reshape((h, w) if channels == 1 else (h, w, 3))
    return np.flipud(arr).copy()


def pfm_size(data: bytes) -> tuple[int, int]:
    head = data[:64].split()
    return int(head[1]), int(head[2])


def quantize_depth_png16(depth: np.ndarray, scale: float) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    finite = np.isfinite(depth)
    codes = np.zeros(depth.shape, dtype=np.uint16)
    q = np.floor(np.where(finite, depth, 0.0) / scale + 0.5)
    codes[finite] = np.clip(q[finite], 1, 65535).astype(np.uint16)
    return codes


def write_depth_png16(depth: np.ndarray, scale: float) -> bytes:
    """16-bit grayscale PNG, ``code * scale`` scene units; lossy."""
    return _pil_bytes(Image.fromarray(quantize_depth_png16(depth, scale)), "PNG", compress_level=PNG_COMPRESS_LEVEL)


def read_depth_png16(data: bytes, scale: float) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        codes = np.array(img).astype(np.float64)
    return np.where(codes == 0, np.inf, codes * scale)
