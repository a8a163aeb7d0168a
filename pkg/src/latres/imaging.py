"""Image planes, decoding, separable resampling and the degradation
pipeline (downscale by a factor k, upscale back to the original size).

Resampling is implemented here rather than delegated so that the exact
kernel, coordinate convention and edge handling are fixed properties of the
toolkit: half-pixel-centered sampling, triangle (bilinear) or Keys a=-0.5
(bicubic) kernels, kernel support widened by the scale factor on downscale
(antialiasing), clamp-to-edge reads, and per-output-pixel weight
normalization. Constant planes are exactly preserved and same-size bilinear
resampling is the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError

RESAMPLE_METHODS = ("bilinear", "bicubic")


@dataclass(frozen=True)
class Plane:
    """A single-channel image: float32 samples in [0,1], row-major."""

    samples: np.ndarray

    def __post_init__(self):
        s = self.samples
        if not isinstance(s, np.ndarray) or s.ndim != 2:
            raise ShapeError("Plane", f"expected a 2-D array, got {getattr(s, 'shape', type(s))}")
        if s.shape[0] < 1 or s.shape[1] < 1:
            raise ShapeError("Plane", f"degenerate dims {s.shape}")
        if s.dtype != np.float32:
            object.__setattr__(self, "samples", s.astype(np.float32))

    @property
    def h(self) -> int:
        return self.samples.shape[0]

    @property
    def w(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class LoadedImage:
    """A decoded image: its luma plane plus the original RGB for provenance."""

    plane: Plane
    rgb: np.ndarray  # (h, w, 3) uint8
    path: str


def load_image(path) -> LoadedImage:
    """Decode a PNG/JPEG file to a [0,1] luma plane (BT.601 weights)."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    r = rgb[:, :, 0].astype(np.float64)
    g = rgb[:, :, 1].astype(np.float64)
    b = rgb[:, :, 2].astype(np.float64)
    # Integer-weight form of 0.299/0.587/0.114 so that pure white maps to
    # exactly 1.0 after the /255 scaling.
    luma = (299.0 * r + 587.0 * g + 114.0 * b) / 255000.0
    plane = Plane(luma.astype(np.float32))
    return LoadedImage(plane=plane, rgb=rgb, path=str(path))


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _triangle(t: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(t))


def _keys(t: np.ndarray) -> np.ndarray:
    # Keys cubic with a = -0.5 (the common "bicubic" kernel).
    a = -0.5
    at = np.abs(t)
    at2 = at * at
    at3 = at2 * at
    inner = (a + 2.0) * at3 - (a + 3.0) * at2 + 1.0
    outer = a * at3 - 5.0 * a * at2 + 8.0 * a * at - 4.0 * a
    return np.where(at <= 1.0, inner, np.where(at < 2.0, outer, 0.0))


_KERNELS = {"bilinear": (_triangle, 1.0), "bicubic": (_keys, 2.0)}


def _axis_weights(in_size: int, out_size: int, method: str):
    """Per-output-pixel tap indices and normalized weights for one axis."""
    kernel, radius = _KERNELS[method]
    scale = in_size / out_size
    filterscale = max(scale, 1.0)
    support = radius * filterscale
    ksize = int(math.ceil(2.0 * support)) + 1

    centers = (np.arange(out_size, dtype=np.float64) + 0.5) * scale
    first = np.floor(centers - support + 0.5).astype(np.int64)
    taps = first[:, None] + np.arange(ksize, dtype=np.int64)[None, :]
    dist = (taps.astype(np.float64) + 0.5 - centers[:, None]) / filterscale
    weights = kernel(dist)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(taps, 0, in_size - 1)
    return idx, weights.astype(np.float32)


def _resample_axis0(x: np.ndarray, out_size: int, method: str) -> np.ndarray:
    idx, w = _axis_weights(x.shape[0], out_size, method)
    gathered = x[idx]  # (out, ksize, w)
    return np.einsum("ok,okw->ow", w, gathered)


def resample(p: Plane, out_h: int, out_w: int, method: str = "bicubic") -> Plane:
    """Resize to exactly (out_h, out_w); output samples clamped to [0,1]."""
    if method not in _KERNELS:
        raise DataError(f"unknown resample method {method!r} (expected one of {RESAMPLE_METHODS})")
    if out_h < 1 or out_w < 1:
        raise ShapeError("resample", f"target dims {out_h}x{out_w} must be >= 1")
    x = p.samples
    if out_h != p.h:
        x = _resample_axis0(x, out_h, method)
    if out_w != p.w:
        x = _resample_axis0(x.T, out_w, method).T
    x = np.clip(x, 0.0, 1.0, out=None if x is p.samples else x)
    return Plane(np.ascontiguousarray(x, dtype=np.float32))


def degrade(p: Plane, k: float, method: str = "bicubic") -> Plane:
    """Downscale by factor k in (0,1], then upscale back to the original
    dims. k=1 returns an identical copy. Intermediate dims round(k*dim)
    (half away from zero) must both be >= 8."""
    if not (0.0 < k <= 1.0):
        raise DataError(f"degradation factor k={k} outside (0, 1]")
    if k == 1.0:
        return Plane(p.samples.copy())
    ih = int(math.floor(k * p.h + 0.5))
    iw = int(math.floor(k * p.w + 0.5))
    if ih < 8 or iw < 8:
        raise DataError(f"degrade: intermediate dims {ih}x{iw} below the 8 px guard (k={k}, input {p.h}x{p.w})")
    mid = resample(p, ih, iw, method)
    return resample(mid, p.h, p.w, method)


def plane_mse(a: Plane, b: Plane) -> float:
    """Mean squared error between two equal-sized planes."""
    if a.samples.shape != b.samples.shape:
        raise ShapeError("plane_mse", f"dims differ: {a.samples.shape} vs {b.samples.shape}")
    d = a.samples.astype(np.float64) - b.samples.astype(np.float64)
    return float(np.mean(d * d))
