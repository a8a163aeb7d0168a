"""A small sequential network: an ordered program of conv / batch-norm /
pool / relu steps over a shared list of LayerParams.

There is no autodiff graph; ``forward`` optionally records per-step caches
and ``backward`` replays them in reverse, returning gradients aligned with
``parameters()``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ShapeError
from . import ops
from .ops import LayerParams


@dataclass
class LayerStack:
    """Layers plus the step program that wires them together.

    steps entries: ("conv", i), ("bn", i), ("pool",), ("relu",) where i
    indexes into ``layers``.
    """

    layers: list
    steps: list

    def set_mode(self, mode: str) -> None:
        if mode not in ("train", "infer"):
            raise ValueError(f"unknown mode {mode!r}")
        for layer in self.layers:
            layer.mode = mode

    @property
    def mode(self) -> str:
        return self.layers[0].mode if self.layers else "infer"

    def parameters(self) -> list:
        """Trainable arrays in a fixed order: per layer w, b, then bn gamma,
        beta when the layer has batch norm."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
            if layer.with_bn:
                out.append(layer.bn_gamma)
                out.append(layer.bn_beta)
        return out

    def forward(self, x: np.ndarray, train: bool = False, keep_cache: bool = False):
        """Run the program. Returns (y, caches); caches is None unless
        ``keep_cache``. ``train`` selects batch-norm mode for this pass
        without touching the stored layer modes."""
        caches = [] if keep_cache else None
        mode = "train" if train else "infer"
        for step in self.steps:
            kind = step[0]
            if kind == "conv":
                layer = self.layers[step[1]]
                x_shape = x.shape
                x, cols = ops.conv2d_forward(x, layer.weights, layer.bias, want_cache=keep_cache)
                if keep_cache:
                    caches.append(("conv", step[1], x_shape, cols))
            elif kind == "bn":
                layer = self.layers[step[1]]
                x, bn_cache = ops.batchnorm_forward(x, layer, mode=mode)
                if keep_cache:
                    caches.append(("bn", step[1], bn_cache))
            elif kind == "pool":
                x_shape = x.shape
                x, idx = ops.maxpool2_forward(x)
                if keep_cache:
                    caches.append(("pool", idx, x_shape))
            elif kind == "relu":
                x = ops.relu_forward(x)
                if keep_cache:
                    caches.append(("relu", x))
            else:
                raise ValueError(f"unknown step {step!r}")
        return x, caches

    def backward(self, gy: np.ndarray, caches: list) -> list:
        """Backprop through the cached forward pass. Returns gradients in the
        same order as ``parameters()``. The input gradient is discarded."""
        if caches is None or len(caches) != len(self.steps):
            raise ShapeError("backward", "caches missing or stale; forward(keep_cache=True) required")
        grads = {i: {} for i in range(len(self.layers))}
        g = gy
        for pos in range(len(caches) - 1, -1, -1):
            entry = caches[pos]
            kind = entry[0]
            if kind == "conv":
                _, li, x_shape, cols = entry
                layer = self.layers[li]
                g, gw, gb = ops.conv2d_backward(g, x_shape, layer.weights, cols,
                                                need_input_grad=(pos > 0))
                slot = grads[li]
                slot["w"] = slot.get("w", 0) + gw
                slot["b"] = slot.get("b", 0) + gb
            elif kind == "bn":
                _, li, bn_cache = entry
                g, ggamma, gbeta = ops.batchnorm_backward(g, bn_cache)
                slot = grads[li]
                slot["gamma"] = slot.get("gamma", 0) + ggamma
                slot["beta"] = slot.get("beta", 0) + gbeta
            elif kind == "pool":
                _, idx, x_shape = entry
                g = ops.maxpool2_backward(g, idx, x_shape)
            elif kind == "relu":
                g = ops.relu_backward(g, entry[1])
        out = []
        for i, layer in enumerate(self.layers):
            slot = grads[i]
            out.append(slot["w"])
            out.append(slot["b"])
            if layer.with_bn:
                out.append(slot["gamma"])
                out.append(slot["beta"])
        return out

    def assert_finite(self, where: str = "") -> None:
        for i, layer in enumerate(self.layers):
            for name, arr in (("weights", layer.weights), ("bias", layer.bias),
                              ("bn_gamma", layer.bn_gamma), ("bn_beta", layer.bn_beta),
                              ("bn_running_mean", layer.bn_running_mean),
                              ("bn_running_var", layer.bn_running_var)):
                if not np.isfinite(arr).all():
                    suffix = f" ({where})" if where else ""
                    raise NumericError(f"non-finite values in layer {i} {name}{suffix}")
