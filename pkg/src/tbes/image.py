"""Image ingestion, color-space conversion, and compressibility normalization.

Images are held as (H, W, 3) float64 arrays tagged with the color space of
the transform last applied. RGB lives in [0, 1]; converted spaces keep their
native ranges (Lab's L in [0, 100], etc.) -- cross-space comparisons are
normalized downstream via ``color_scale_factor``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _pnm
from .validation import check_image_array

COLORSPACES = ("rgb", "lab", "yuv", "xyz", "hsv")

# sRGB <-> XYZ, D65 white point, 2-degree observer.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_SRGB = np.linalg.inv(_SRGB_TO_XYZ)
_D65_WHITE = np.array([0.95047, 1.00000, 1.08883])

# BT.601 analog YUV.
_YUV_FROM_RGB = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.14713, -0.28886, 0.436],
        [0.615, -0.51499, -0.10001],
    ]
)
_RGB_FROM_YUV = np.linalg.inv(_YUV_FROM_RGB)

_LAB_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class RasterImage:
    """An H x W x 3 pixel grid plus the color space it currently lives in."""

    data: np.ndarray
    colorspace: str = "rgb"

    def __post_init__(self):
        object.__setattr__(self, "data", check_image_array(self.data))
        if self.colorspace not in COLORSPACES:
            raise ValueError(f"unknown colorspace {self.colorspace!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]


def load_image(path) -> RasterImage:
    """Load a binary PPM (P6, 8-bit) or PNG (8-bit RGB) as an RGB RasterImage.

    Channel values are scaled to [0, 1].
    """
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P6":
        pixels = _pnm.read_ppm(path)
    elif magic == b"\x89P":
        pixels = _load_png(path)
    else:
        raise ValueError(f"unsupported image format (expected PPM P6 or PNG): {path}")
    return RasterImage(pixels.astype(np.float64) / 255.0, "rgb")


def _load_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            raise ValueError(f"unsupported bit depth in PNG {path} (mode {im.mode})")
        if im.mode != "RGB":
            raise ValueError(f"PNG must be 8-bit 3-channel RGB, got mode {im.mode}: {path}")
        return np.asarray(im, dtype=np.uint8)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    return np.where(
        c <= 0.0031308, 12.92 * c, 1.055 * np.power(np.maximum(c, 0.0), 1.0 / 2.4) - 0.055
    )


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA, t**3, 3 * _LAB_DELTA**2 * (t - 4.0 / 29.0))


def _rgb_to_xyz(rgb: np.ndarray) -> np.ndarray:
    return _srgb_to_linear(rgb) @ _SRGB_TO_XYZ.T


def _xyz_to_rgb(xyz: np.ndarray) -> np.ndarray:
    return _linear_to_srgb(xyz @ _XYZ_TO_SRGB.T)


def _rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    f = _lab_f(_rgb_to_xyz(rgb) / _D65_WHITE)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def _lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = _lab_f_inv(np.stack([fx, fy, fz], axis=-1)) * _D65_WHITE
    return _xyz_to_rgb(xyz)


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    delta = v - lo
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    h = np.zeros_like(v)
    nz = delta > 0
    mr = nz & (v == r)
    mg = nz & (v == g) & ~mr
    mb = nz & ~mr & ~mg
    safe = np.where(nz, delta, 1.0)
    h = np.where(mr, ((g - b) / safe) % 6.0, h)
    h = np.where(mg, (b - r) / safe + 2.0, h)
    h = np.where(mb, (r - g) / safe + 4.0, h)
    return np.stack([h / 6.0, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0] % 1.0, hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


_FROM_RGB = {"lab": _rgb_to_lab, "yuv": lambda a: a @ _YUV_FROM_RGB.T, "xyz": _rgb_to_xyz, "hsv": _rgb_to_hsv}
_TO_RGB = {"lab": _lab_to_rgb, "yuv": lambda a: a @ _RGB_FROM_YUV.T, "xyz": _xyz_to_rgb, "hsv": _hsv_to_rgb}


def convert_color(img: RasterImage, target: str) -> RasterImage:
    """Convert an RGB image to `target` space (per-pixel, pure)."""
    if target not in COLORSPACES:
        raise ValueError(f"unsupported target colorspace {target!r}")
    if img.colorspace != "rgb":
        raise ValueError(f"convert_color expects an RGB image, got {img.colorspace}")
    if target == "rgb":
        return RasterImage(img.data.copy(), "rgb")
    return RasterImage(_FROM_RGB[target](img.data), target)


def to_rgb(img: RasterImage) -> RasterImage:
    """Inverse conversion back to RGB (defined for every supported space)."""
    if img.colorspace == "rgb":
        return RasterImage(img.data.copy(), "rgb")
    return RasterImage(_TO_RGB[img.colorspace](img.data), "rgb")


def color_scale_factor(max_eigenvalues) -> float:
    """Normalization factor 1/sqrt(mean of per-region maximum eigenvalues).

    Puts feature coordinates from different color spaces on a comparable
    scale before coding lengths are compared.
    """
    vals = np.asarray(max_eigenvalues, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("need at least one eigenvalue")
    if np.any(vals <= 0):
        raise ValueError("eigenvalues must be positive")
    return 1.0 / math.sqrt(float(vals.mean()))
