"""The two resolution networks (shared architecture, head width d=6 for
classification and d=1 for regression), full-image output maps, and the
mask-propagation geometry that locates corners in the output map.

Architecture (valid convolutions, stride 1):

    conv 16@5x5 + bn
    conv 16@5x5 + bn
    maxpool 2x2/2
    conv 32@5x5 + bn
    maxpool 2x2/2
    conv 32@5x5 + bn
    relu
    conv d@8x8           (head, no bn)

On 64x64 input the spatial chain is 64-60-56-28-24-12-8-1, so the same
weights run either per-patch (64x64 -> d-vector) or fully convolutionally
over a whole image (m x n -> p x q x d map).
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .corners import Mask
from .errors import DataError, ShapeError
from .imaging import Plane
from .nn import LayerParams, LayerStack, checkpoint

PATCH = 64

# (out_ch or None-for-d, kernel, with_bn) per conv layer.
_CONV_LAYERS = ((16, 5, True), (16, 5, True), (32, 5, True), (32, 5, True), (None, 8, False))

# The step program: conv indices refer to _CONV_LAYERS order.
_PROGRAM = (
    ("conv", 0), ("bn", 0),
    ("conv", 1), ("bn", 1),
    ("pool",),
    ("conv", 2), ("bn", 2),
    ("pool",),
    ("conv", 3), ("bn", 3),
    ("relu",),
    ("conv", 4),
)


def build_stack(d: int, seed: int = 0, dtype=np.float32) -> LayerStack:
    """Fresh network with head width d (6 = class logits, 1 = scalar)."""
    if d not in (1, 6):
        raise DataError(f"head width d must be 1 or 6, got {d}")
    rng = np.random.default_rng(seed)
    layers = []
    in_ch = 1
    for out_ch, k, with_bn in _CONV_LAYERS:
        oc = d if out_ch is None else out_ch
        layers.append(LayerParams.create(in_ch, oc, k, rng, dtype=dtype, with_bn=with_bn))
        in_ch = oc
    return LayerStack(layers=layers, steps=list(_PROGRAM))


def head_width(stack: LayerStack) -> int:
    return stack.layers[-1].weights.shape[0]


def shape_fn(t: int) -> int:
    """Output-map extent for input extent t (t >= 64)."""
    if t < PATCH:
        raise ShapeError("shape_fn", f"input extent {t} below the {PATCH} px minimum")
    return (((t - 8) // 2) - 4) // 2 - 11


@dataclass(frozen=True)
class OutputMap:
    """Full-image network output: (1, d, p, q) with p/q tied to the source
    image dims by shape_fn."""

    data: np.ndarray
    src_h: int
    src_w: int

    def __post_init__(self):
        d = self.data
        if d.ndim != 4 or d.shape[0] != 1:
            raise ShapeError("OutputMap", f"expected (1,d,p,q), got {d.shape}")
        want = (shape_fn(self.src_h), shape_fn(self.src_w))
        if d.shape[2:] != want:
            raise ShapeError(
                "OutputMap",
                f"map {d.shape[2:]} inconsistent with source {self.src_h}x{self.src_w} (expected {want})",
            )

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def p(self) -> int:
        return self.data.shape[2]

    @property
    def q(self) -> int:
        return self.data.shape[3]


def forward_patch(stack: LayerStack, patch) -> np.ndarray:
    """Run one 64x64 patch; returns the d-vector (infer-mode batch norm)."""
    x = patch.samples if isinstance(patch, Plane) else np.asarray(patch)
    if x.shape != (PATCH, PATCH):
        raise ShapeError("forward_patch", f"patch must be {PATCH}x{PATCH}, got {x.shape}")
    x = x.astype(stack.layers[0].weights.dtype, copy=False)[None, None]
    y, _ = stack.forward(x, train=False)
    return y[0, :, 0, 0]


def forward_map(stack: LayerStack, image) -> OutputMap:
    """Run the network fully convolutionally over an m x n image."""
    x = image.samples if isinstance(image, Plane) else np.asarray(image)
    if x.ndim != 2:
        raise ShapeError("forward_map", f"expected a 2-D image, got {x.shape}")
    m, n = x.shape
    if m < PATCH or n < PATCH:
        raise ShapeError("forward_map", f"image {m}x{n} smaller than the {PATCH} px minimum")
    xb = x.astype(stack.layers[0].weights.dtype, copy=False)[None, None]
    y, _ = stack.forward(xb, train=False)
    return OutputMap(data=y, src_h=m, src_w=n)


# ---------------------------------------------------------------------------
# mask propagation
# ---------------------------------------------------------------------------
# Each valid conv(k) trims the coordinate frame; the mask loses
# ceil((k-1)/2) rows/cols at the top/left and floor((k-1)/2) at the
# bottom/right (2/2 for k=5, 4/3 for k=8). This split keeps a corner at
# pixel (4x+32, 4y+32) mapped to map cell (x, y), i.e. to the cell whose
# receptive field is exactly the 64x64 patch centered on that corner.
# Pooling ORs each 2x2 window (odd trailing row/col truncated).


def _conv_crops(k: int):
    total = k - 1
    lead = (total + 1) // 2
    return lead, total - lead


def propagate_mask(mask: Mask, stack: LayerStack | None = None) -> Mask:
    """Transform an image-aligned binary mask into output-map coordinates."""
    bits = mask.bits
    if bits.shape[0] < PATCH or bits.shape[1] < PATCH:
        raise ShapeError("propagate_mask", f"mask {bits.shape} smaller than the {PATCH} px minimum")
    steps = stack.steps if stack is not None else _PROGRAM
    layers = stack.layers if stack is not None else None
    for step in steps:
        if step[0] == "conv":
            k = layers[step[1]].weights.shape[2] if layers is not None else _CONV_LAYERS[step[1]][1]
            lead, trail = _conv_crops(k)
            bits = bits[lead : bits.shape[0] - trail, lead : bits.shape[1] - trail]
        elif step[0] == "pool":
            oh, ow = bits.shape[0] // 2, bits.shape[1] // 2
            bits = (
                bits[0 : 2 * oh : 2, 0 : 2 * ow : 2]
                | bits[0 : 2 * oh : 2, 1 : 2 * ow : 2]
                | bits[1 : 2 * oh : 2, 0 : 2 * ow : 2]
                | bits[1 : 2 * oh : 2, 1 : 2 * ow : 2]
            )
        # bn / relu are pointwise: no geometry change.
    return Mask(bits=np.ascontiguousarray(bits))


def mask_locations(t: Mask) -> list:
    """Nonzero cells of a propagated mask, row-major."""
    return [(int(r), int(c)) for r, c in np.argwhere(t.bits)]


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_model(stack: LayerStack, path) -> None:
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    arrays["meta/with_bn"] = np.array([int(l.with_bn) for l in stack.layers], dtype=np.uint8)
    arrays["meta/bn_momentum"] = np.array([stack.layers[0].bn_momentum], dtype=np.float64)
    arrays["meta/bn_eps"] = np.array([stack.layers[0].bn_eps], dtype=np.float64)
    for i, layer in enumerate(stack.layers):
        arrays[f"layer{i}/weights"] = layer.weights
        arrays[f"layer{i}/bias"] = layer.bias
        if layer.with_bn:
            arrays[f"layer{i}/bn_gamma"] = layer.bn_gamma
            arrays[f"layer{i}/bn_beta"] = layer.bn_beta
            arrays[f"layer{i}/bn_running_mean"] = layer.bn_running_mean
            arrays[f"layer{i}/bn_running_var"] = layer.bn_running_var
    checkpoint.save_arrays(path, arrays)


def load_model(path) -> LayerStack:
    arrays = checkpoint.load_arrays(path)
    try:
        with_bn = arrays["meta/with_bn"]
        momentum = float(arrays["meta/bn_momentum"][0])
        eps = float(arrays["meta/bn_eps"][0])
        layers = []
        for i in range(len(with_bn)):
            w = arrays[f"layer{i}/weights"]
            oc = w.shape[0]
            has_bn = bool(with_bn[i])
            layer = LayerParams(
                weights=w,
                bias=arrays[f"layer{i}/bias"],
                bn_gamma=arrays[f"layer{i}/bn_gamma"] if has_bn else np.ones(oc, dtype=w.dtype),
                bn_beta=arrays[f"layer{i}/bn_beta"] if has_bn else np.zeros(oc, dtype=w.dtype),
                bn_running_mean=arrays[f"layer{i}/bn_running_mean"] if has_bn else np.zeros(oc, dtype=w.dtype),
                bn_running_var=arrays[f"layer{i}/bn_running_var"] if has_bn else np.ones(oc, dtype=w.dtype),
                bn_momentum=momentum,
                bn_eps=eps,
                mode="infer",
                with_bn=has_bn,
            )
            layers.append(layer)
    except KeyError as exc:
        raise DataError(f"checkpoint {path} missing tensor {exc}") from exc
    expected = [k for _, k, _ in _CONV_LAYERS]
    got = [l.weights.shape[2] for l in layers]
    if got != expected:
        raise DataError(f"checkpoint {path} kernel sizes {got} do not match the fixed architecture {expected}")
    return LayerStack(layers=layers, steps=list(_PROGRAM))


def describe(d: int | None = None) -> str:
    """Human-readable architecture and output-size table."""
    lines = []
    head = "d" if d is None else str(d)
    lines.append("layer stack (valid conv, stride 1):")
    lines.append(f"  conv 16@5x5 + bn")
    lines.append(f"  conv 16@5x5 + bn")
    lines.append(f"  maxpool 2x2 stride 2")
    lines.append(f"  conv 32@5x5 + bn")
    lines.append(f"  maxpool 2x2 stride 2")
    lines.append(f"  conv 32@5x5 + bn")
    lines.append(f"  relu")
    lines.append(f"  conv {head}@8x8 (head)")
    lines.append("")
    lines.append("input extent -> output-map extent:")
    for t in (64, 96, 128, 256, 480, 720, 1080, 1920):
        lines.append(f"  {t:5d} -> {shape_fn(t)}")
    return "\n".join(lines)
