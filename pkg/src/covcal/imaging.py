"""Grayscale image container, loading/saving and preprocessing.

Images are stored as row-major ``float64`` arrays of shape ``(height, width)``
with intensities in ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageLoadError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
FLAT_SIGMA = 1e-9
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class PixelPos(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable single-channel image with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("GrayImage intensities must be finite and within [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def clipped(cls, data) -> "GrayImage":
        return cls(np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class PreprocessConfig:
    target_width: int | None = None
    patchnorm_radius: int | None = None
    convert_grayscale: bool = True

    def __post_init__(self):
        if self.target_width is not None and self.target_width < 1:
            raise ValueError("target_width must be >= 1")
        if self.patchnorm_radius is not None and self.patchnorm_radius < 1:
            raise ValueError("patchnorm_radius must be >= 1")


def load_image(path) -> GrayImage:
    """Load an 8-bit PGM (P5) or PNG file as a GrayImage.

    RGB input is reduced to luminance with the Rec. 601 weights; 8-bit values
    are divided by 255.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
    except FileNotFoundError as exc:
        raise ImageLoadError(f"{path}: no such file") from exc
    except OSError as exc:
        raise ImageLoadError(f"{path}: {exc}") from exc
    if not (magic.startswith(b"P5") or magic == PNG_MAGIC):
        raise ImageLoadError(f"{path}: unsupported format (binary PGM or PNG only)")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode in ("L", "LA"):
                arr = np.asarray(im.getchannel(0), dtype=np.float64)
            elif mode in ("RGB", "RGBA"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = rgb @ np.asarray(LUMA_WEIGHTS)
            else:
                raise ImageLoadError(f"{path}: unsupported pixel mode {mode!r} (8-bit only)")
    except FileNotFoundError as exc:
        raise ImageLoadError(f"{path}: no such file") from exc
    except UnidentifiedImageError as exc:
        raise ImageLoadError(f"{path}: not a readable PGM/PNG image") from exc
    except ImageLoadError:
        raise
    except (OSError, ValueError) as exc:  # truncated or corrupt data
        raise ImageLoadError(f"{path}: {exc}") from exc
    if arr.size == 0:
        raise ImageLoadError(f"{path}: zero-size image")
    return GrayImage.clipped(arr / 255.0)


def to_uint8(img: GrayImage) -> np.ndarray:
    return np.floor(img.data * 255.0 + 0.5).astype(np.uint8)


def quantize(img: GrayImage) -> GrayImage:
    """Snap intensities to the 8-bit grid so a PGM round trip is lossless."""
    return GrayImage(to_uint8(img).astype(np.float64) / 255.0)


def save_pgm(img: GrayImage, path) -> None:
    """Write a binary (P5) 8-bit PGM."""
    path = Path(path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + to_uint8(img).tobytes())


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    # Area-weighted overlap of output cell [i*s, (i+1)*s) with input pixel [j, j+1).
    scale = n_in / n_out
    edges_out = np.arange(n_out + 1) * scale
    lo = edges_out[:-1, None]
    hi = edges_out[1:, None]
    j = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    scale = n_in / n_out
    src = np.clip((np.arange(n_out) + 0.5) * scale - 0.5, 0.0, n_in - 1)
    j0 = np.floor(src).astype(int)
    j1 = np.minimum(j0 + 1, n_in - 1)
    frac = src - j0
    w = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(w, (rows, j0), 1.0 - frac)
    np.add.at(w, (rows, j1), frac)
    return w


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray | None:
    if n_out == n_in:
        return None
    if n_out < n_in:
        return _box_weights(n_in, n_out)
    return _bilinear_weights(n_in, n_out)


def downsample_to_width(img: GrayImage, target_width: int) -> GrayImage:
    """Resize to ``target_width`` keeping the aspect ratio.

    Shrinking uses exact area averaging (box filter); enlarging uses bilinear
    interpolation with half-pixel centres. Equal width returns the input.
    """
    if target_width < 1:
        raise ValueError("target_width must be >= 1")
    if target_width == img.width:
        return img
    target_height = max(1, _round_half_up(img.height * target_width / img.width))
    out = img.data
    wy = _resample_matrix(img.height, target_height)
    if wy is not None:
        out = wy @ out
    wx = _resample_matrix(img.width, target_width)
    if wx is not None:
        out = out @ wx.T
    return GrayImage.clipped(out)


def _window_offsets(radius: int):
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            yield dy, dx


def _shifted(arr: np.ndarray, dy: int, dx: int, fill: float):
    """``arr`` sampled at (y + dy, x + dx) with ``fill`` outside the image."""
    h, w = arr.shape
    out = np.full_like(arr, fill)
    ys, ye = max(0, -dy), min(h, h - dy)
    xs, xe = max(0, -dx), min(w, w - dx)
    if ys < ye and xs < xe:
        out[ys:ye, xs:xe] = arr[ys + dy:ye + dy, xs + dx:xe + dx]
    return out


def local_window_stats(arr: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std over border-clipped (2r+1)^2 windows.

    Two-pass (mean first, then squared deviations) so flat windows give an
    exact zero std. Cost is O(r^2) passes over the image, which is fine for
    the small normalisation radii this is used with.
    """
    ones = np.ones_like(arr)
    total = np.zeros_like(arr)
    count = np.zeros_like(arr)
    for dy, dx in _window_offsets(radius):
        total += _shifted(arr, dy, dx, 0.0)
        count += _shifted(ones, dy, dx, 0.0)
    mean = total / count
    sq = np.zeros_like(arr)
    for dy, dx in _window_offsets(radius):
        inside = _shifted(ones, dy, dx, 0.0)
        diff = _shifted(arr, dy, dx, 0.0) - mean
        sq += inside * diff * diff
    return mean, np.sqrt(sq / count)


def patch_normalize(img: GrayImage, radius: int) -> GrayImage:
    """Local patch normalisation.

    Each pixel becomes ``clamp(0.5 + (v - mean) / (6 * std), 0, 1)`` using the
    statistics of the border-clipped window of the given radius around it.
    Flat windows (std < 1e-9) map to 0.5.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    mean, std = local_window_stats(img.data, radius)
    flat = std < FLAT_SIGMA
    safe = np.where(flat, 1.0, std)
    out = np.where(flat, 0.5, 0.5 + (img.data - mean) / (6.0 * safe))
    return GrayImage.clipped(out)


def preprocess(img: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    if cfg.target_width is not None:
        img = downsample_to_width(img, cfg.target_width)
    if cfg.patchnorm_radius is not None:
        img = patch_normalize(img, cfg.patchnorm_radius)
    return img
