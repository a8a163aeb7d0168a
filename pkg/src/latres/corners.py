"""Harris corner detection, non-maximal suppression, and the binary corner
mask consumed by the mask-propagation pipeline.

Detector constants (Sobel 3x3 gradients, Gaussian window sigma=1.5
truncated at 3 sigma, kappa=0.05) and the suppression policy (radius 10,
relative threshold 0.01 of the peak response, at most 200 corners) are
fixed defaults, overridable where it matters for experiments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d, maximum_filter

from .errors import ShapeError
from .imaging import Plane

NMS_RADIUS = 10
NMS_REL_THRESHOLD = 0.01
MAX_CORNERS = 200
HARRIS_KAPPA = 0.05
HARRIS_SIGMA = 1.5


@dataclass(frozen=True)
class CornerSet:
    """Detected corners: (row, col) points sorted by descending response,
    pairwise Chebyshev distance > the suppression radius, all in-bounds."""

    points: tuple          # ((row, col), ...)
    responses: tuple       # matching Harris responses
    h: int
    w: int
    radius: int = NMS_RADIUS

    def __post_init__(self):
        if len(self.points) != len(self.responses):
            raise ShapeError("CornerSet", "points/responses length mismatch")
        prev = None
        for (r, c), v in zip(self.points, self.responses):
            if not (0 <= r < self.h and 0 <= c < self.w):
                raise ShapeError("CornerSet", f"point ({r},{c}) outside {self.h}x{self.w}")
            if prev is not None and v > prev:
                raise ShapeError("CornerSet", "responses not in descending order")
            prev = v

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Mask:
    """Binary grid; ones mark corner locations."""

    bits: np.ndarray  # (h, w) uint8 in {0,1}

    def __post_init__(self):
        b = self.bits
        if not isinstance(b, np.ndarray) or b.ndim != 2:
            raise ShapeError("Mask", f"expected a 2-D array, got {getattr(b, 'shape', type(b))}")
        if b.dtype != np.uint8:
            object.__setattr__(self, "bits", b.astype(np.uint8))
        if self.bits.size and self.bits.max() > 1:
            raise ShapeError("Mask", "bits must be 0/1")

    @property
    def h(self) -> int:
        return self.bits.shape[0]

    @property
    def w(self) -> int:
        return self.bits.shape[1]

    def popcount(self) -> int:
        return int(self.bits.sum())


def _sobel_gradients(x: np.ndarray):
    deriv = np.array([1.0, 0.0, -1.0])
    smooth = np.array([1.0, 2.0, 1.0])
    gx = convolve1d(convolve1d(x, deriv, axis=1, mode="reflect"), smooth, axis=0, mode="reflect") / 8.0
    gy = convolve1d(convolve1d(x, deriv, axis=0, mode="reflect"), smooth, axis=1, mode="reflect") / 8.0
    return gx, gy


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(3.0 * sigma + 0.5)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _gauss_smooth(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return convolve1d(convolve1d(x, kernel, axis=0, mode="reflect"), kernel, axis=1, mode="reflect")


def harris(p: Plane, kappa: float = HARRIS_KAPPA, sigma: float = HARRIS_SIGMA) -> np.ndarray:
    """Harris response map R = det(S) - kappa*trace(S)^2, same dims as p.

    S is the structure tensor of Sobel gradients, smoothed with a Gaussian
    window of the given sigma.
    """
    if p.h < 7 or p.w < 7:
        raise ShapeError("harris", f"plane {p.h}x{p.w} too small (needs >= 7x7)")
    x = p.samples.astype(np.float64)
    gx, gy = _sobel_gradients(x)
    kern = _gaussian_kernel(sigma)
    sxx = _gauss_smooth(gx * gx, kern)
    syy = _gauss_smooth(gy * gy, kern)
    sxy = _gauss_smooth(gx * gy, kern)
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    return det - kappa * trace * trace


def nms(response: np.ndarray, radius: int = NMS_RADIUS,
        rel_threshold: float = NMS_REL_THRESHOLD,
        max_corners: int = MAX_CORNERS) -> CornerSet:
    """Greedy non-maximal suppression over a response map.

    Local maxima above rel_threshold * max(response) are accepted in
    descending response order while they stay more than ``radius`` away
    (Chebyshev) from every already-accepted corner; capped at max_corners.
    A map with no positive response yields an empty set.
    """
    if radius < 1:
        raise ShapeError("nms", f"radius must be >= 1, got {radius}")
    h, w = response.shape
    peak = float(response.max()) if response.size else 0.0
    if peak <= 0.0:
        return CornerSet(points=(), responses=(), h=h, w=w, radius=radius)
    thresh = rel_threshold * peak

    size = 2 * radius + 1
    local_max = response >= maximum_filter(response, size=size, mode="constant", cval=-np.inf)
    cand = np.argwhere(local_max & (response > thresh))
    if cand.size == 0:
        return CornerSet(points=(), responses=(), h=h, w=w, radius=radius)
    rows = cand[:, 0]
    cols = cand[:, 1]
    vals = response[rows, cols]
    order = np.lexsort((cols, rows, -vals))
    rows, cols, vals = rows[order], cols[order], vals[order]

    kept_r: list[int] = []
    kept_c: list[int] = []
    kept_v: list[float] = []
    kr = np.empty(max_corners, dtype=np.int64)
    kc = np.empty(max_corners, dtype=np.int64)
    for r, c, v in zip(rows, cols, vals):
        n = len(kept_r)
        if n:
            cheb = np.maximum(np.abs(kr[:n] - r), np.abs(kc[:n] - c))
            if cheb.min() <= radius:
                continue
        kr[n] = r
        kc[n] = c
        kept_r.append(int(r))
        kept_c.append(int(c))
        kept_v.append(float(v))
        if len(kept_r) >= max_corners:
            break
    return CornerSet(
        points=tuple(zip(kept_r, kept_c)),
        responses=tuple(kept_v),
        h=h,
        w=w,
        radius=radius,
    )


def detect_corners(p: Plane, radius: int = NMS_RADIUS,
                   rel_threshold: float = NMS_REL_THRESHOLD,
                   max_corners: int = MAX_CORNERS,
                   kappa: float = HARRIS_KAPPA, sigma: float = HARRIS_SIGMA) -> CornerSet:
    """harris + nms in one call."""
    return nms(harris(p, kappa=kappa, sigma=sigma), radius=radius,
               rel_threshold=rel_threshold, max_corners=max_corners)


def corner_mask(corners: CornerSet) -> Mask:
    """Binary mask with ones at the corner locations."""
    bits = np.zeros((corners.h, corners.w), dtype=np.uint8)
    for r, c in corners.points:
        bits[r, c] = 1
    return Mask(bits=bits)


def write_corners_csv(corners: CornerSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "response"])
        for (r, c), v in zip(corners.points, corners.responses):
            writer.writerow([r, c, repr(v)])
