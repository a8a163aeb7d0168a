"""Aggregation of per-patch / per-location / per-frame predictions into
image- and video-level latent-resolution estimates.

The percentile is nearest-rank (the ceil(p*n/100)-th smallest element), so
aggregating class indices always yields a valid class index.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DataError, ShapeError
from .models import OutputMap

IMAGE_PCT = 90
VIDEO_PCT = 70
FALLBACK_CLASS = 6
FALLBACK_VALUE = 1.0


def percentile(values, p) -> float | int:
    """Nearest-rank percentile: the element at 1-based index ceil(p*n/100)
    of the ascending sort, clamped to [1, n]. Always a member of ``values``."""
    arr = np.asarray(values)
    n = arr.size
    if n == 0:
        raise DataError("percentile of an empty sample")
    if not (0 <= p <= 100):
        raise DataError(f"percentile p={p} outside [0, 100]")
    srt = np.sort(arr, kind="stable")
    if float(p).is_integer():
        idx = -((-int(p) * n) // 100)  # exact integer ceil
    else:
        idx = math.ceil(p * n / 100.0)
    idx = min(max(idx, 1), n)
    out = srt[idx - 1]
    return out.item()


def image_class(classes, image_pct: float = IMAGE_PCT) -> int:
    """Per-image class: nearest-rank percentile of the unit classes."""
    arr = np.asarray(classes)
    if arr.size == 0:
        raise DataError("image_class: no corners produced any class predictions")
    if arr.min() < 1 or arr.max() > 6:
        raise DataError(f"image_class: class indices outside 1..6 (range [{arr.min()}, {arr.max()}])")
    return int(percentile(arr, image_pct))


def image_reg(m: OutputMap, locations) -> float:
    """Per-image regression value: mean of the d=1 map over the propagated
    corner locations."""
    if m.d != 1:
        raise ShapeError("image_reg", f"needs a d=1 map, got d={m.d}")
    if len(locations) == 0:
        raise DataError("image_reg: empty location set")
    vals = [float(m.data[0, 0, x, y]) for x, y in locations]
    return float(np.mean(vals))


def video_quality(frame_preds, video_pct: float = VIDEO_PCT):
    """Per-video verdict: nearest-rank percentile of per-frame predictions
    (class indices or regression values)."""
    arr = np.asarray(frame_preds)
    if arr.size == 0:
        raise DataError("video_quality: no frame predictions")
    out = percentile(arr, video_pct)
    return int(out) if np.issubdtype(arr.dtype, np.integer) else float(out)
