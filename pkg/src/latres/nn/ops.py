"""Differentiable layer primitives: valid 2-D convolution, 2x2 max-pooling,
batch normalization and ReLU.

Each primitive comes as a functional pair ``*_forward`` / ``*_backward``
operating on plain ndarrays (these are what the layer stack uses), plus a
Tensor-level convenience wrapper with the layer's public name. Convolutions
are valid (no padding), stride 1; pooling is 2x2 stride 2 with trailing
row/column truncation on odd inputs.

The convolution uses im2col + GEMM. Forward-only calls on large inputs
(full-frame inference) are chunked over output rows so the column buffer
stays bounded; training-path calls cache the column matrix for backward.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor

# Column buffers beyond this size trigger row-chunked (cacheless) convolution.
_COL_BYTES_LIMIT = 192 * 1024 * 1024
_COL_BYTES_CHUNK = 96 * 1024 * 1024


@dataclass
class LayerParams:
    """Parameters of one convolution layer and its batch-norm stage.

    The head convolution of the resolution networks carries no batch norm;
    for it ``with_bn`` is False and the bn fields stay at their init values.
    """

    weights: np.ndarray            # (out_ch, in_ch, k, k)
    bias: np.ndarray               # (out_ch,)
    bn_gamma: np.ndarray           # (out_ch,)
    bn_beta: np.ndarray            # (out_ch,)
    bn_running_mean: np.ndarray    # (out_ch,)
    bn_running_var: np.ndarray     # (out_ch,)
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    mode: str = "train"            # {"train", "infer"}
    with_bn: bool = True

    @classmethod
    def create(cls, in_ch: int, out_ch: int, k: int, rng: np.random.Generator,
               dtype=np.float32, with_bn: bool = True) -> "LayerParams":
        """Kaiming (fan-in) initialized conv weights, unit bn statistics."""
        fan_in = in_ch * k * k
        std = np.sqrt(2.0 / fan_in)
        w = rng.standard_normal((out_ch, in_ch, k, k)).astype(dtype) * dtype(std)
        return cls(
            weights=w,
            bias=np.zeros(out_ch, dtype=dtype),
            bn_gamma=np.ones(out_ch, dtype=dtype),
            bn_beta=np.zeros(out_ch, dtype=dtype),
            bn_running_mean=np.zeros(out_ch, dtype=dtype),
            bn_running_var=np.ones(out_ch, dtype=dtype),
            with_bn=with_bn,
        )

    def astype(self, dtype) -> "LayerParams":
        return LayerParams(
            weights=self.weights.astype(dtype),
            bias=self.bias.astype(dtype),
            bn_gamma=self.bn_gamma.astype(dtype),
            bn_beta=self.bn_beta.astype(dtype),
            bn_running_mean=self.bn_running_mean.astype(dtype),
            bn_running_var=self.bn_running_var.astype(dtype),
            bn_momentum=self.bn_momentum,
            bn_eps=self.bn_eps,
            mode=self.mode,
            with_bn=self.with_bn,
        )


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(n,c,h,w) -> (n, c*k*k, oh*ow) column matrix for a k x k valid conv."""
    n, c, h, w = x.shape
    oh, ow = h - k + 1, w - k + 1
    s0, s1, s2, s3 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x, shape=(n, c, k, k, oh, ow), strides=(s0, s1, s2, s3, s2, s3), writeable=False
    )
    return view.reshape(n, c * k * k, oh * ow)


def _check_conv_shapes(x_shape, w_shape):
    n, c, h, w = x_shape
    oc, ic, kh, kw = w_shape
    if kh != kw:
        raise ShapeError("conv2d", f"kernel must be square, got {w_shape}")
    if ic != c:
        raise ShapeError(
            "conv2d", f"input channels {c} != kernel in-channels {ic} (input {x_shape}, kernel {w_shape})"
        )
    if h < kh or w < kw:
        raise ShapeError(
            "conv2d", f"input spatial {h}x{w} smaller than kernel {kh}x{kw} (input {x_shape}, kernel {w_shape})"
        )
    return kh


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, want_cache: bool = False):
    """Valid convolution forward. Returns (y, cols) where cols is None unless
    ``want_cache`` is set (cols are needed for the backward pass)."""
    k = _check_conv_shapes(x.shape, w.shape)
    n, c, h, wd = x.shape
    oc = w.shape[0]
    oh, ow = h - k + 1, wd - k + 1
    ckk = c * k * k
    w2 = w.reshape(oc, ckk)

    col_bytes = n * ckk * oh * ow * x.dtype.itemsize
    if not want_cache and col_bytes > _COL_BYTES_LIMIT:
        # Inference on large frames: chunk output rows, never materializing
        # the full column matrix.
        y = np.empty((n, oc, oh, ow), dtype=x.dtype)
        rows_per_chunk = max(1, _COL_BYTES_CHUNK // max(1, n * ckk * ow * x.dtype.itemsize))
        for r0 in range(0, oh, rows_per_chunk):
            r1 = min(oh, r0 + rows_per_chunk)
            cols = _im2col(x[:, :, r0 : r1 + k - 1, :], k)
            yc = np.matmul(w2, cols)
            y[:, :, r0:r1, :] = yc.reshape(n, oc, r1 - r0, ow)
        y += b.reshape(1, oc, 1, 1)
        return y, None

    cols = _im2col(x, k)
    y = np.matmul(w2, cols).reshape(n, oc, oh, ow)
    y += b.reshape(1, oc, 1, 1)
    return y, cols if want_cache else None


def conv2d_backward(gy: np.ndarray, x_shape, w: np.ndarray, cols: np.ndarray,
                    need_input_grad: bool = True):
    """Gradients of a valid convolution. Returns (gx, gw, gb); gx is None when
    ``need_input_grad`` is False (first layer of a stack)."""
    n, c, h, wd = x_shape
    oc, _, k, _ = w.shape
    oh, ow = h - k + 1, wd - k + 1
    ckk = c * k * k
    gy2 = gy.reshape(n, oc, oh * ow)

    gb = gy2.sum(axis=(0, 2))
    # (n,oc,L) @ (n,L,ckk) -> (n,oc,ckk), summed over the batch
    gw = np.matmul(gy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)

    gx = None
    if need_input_grad:
        w2 = w.reshape(oc, ckk)
        gcols = np.matmul(w2.T, gy2)  # (n, ckk, L)
        g6 = gcols.reshape(n, c, k, k, oh, ow)
        gx = np.zeros(x_shape, dtype=gy.dtype)
        for i in range(k):
            for j in range(k):
                gx[:, :, i : i + oh, j : j + ow] += g6[:, :, i, j]
    return gx, gw, gb


def conv2d(input: Tensor, params: LayerParams) -> Tensor:
    """Tensor-level valid convolution (forward only)."""
    y, _ = conv2d_forward(input.data, params.weights, params.bias)
    return Tensor(y)


# ---------------------------------------------------------------------------
# 2x2 max pooling, stride 2
# ---------------------------------------------------------------------------

def maxpool2_forward(x: np.ndarray):
    """Returns (y, idx) with idx in {0..3} recording the argmax corner of each
    window (0=(0,0), 1=(0,1), 2=(1,0), 3=(1,1)). Odd trailing rows/columns are
    truncated."""
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    if oh < 1 or ow < 1:
        raise ShapeError("maxpool2", f"input {x.shape} too small for a 2x2 window")
    win = np.stack(
        (
            x[:, :, 0 : 2 * oh : 2, 0 : 2 * ow : 2],
            x[:, :, 0 : 2 * oh : 2, 1 : 2 * ow : 2],
            x[:, :, 1 : 2 * oh : 2, 0 : 2 * ow : 2],
            x[:, :, 1 : 2 * oh : 2, 1 : 2 * ow : 2],
        ),
        axis=-1,
    )
    idx = win.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, idx


def maxpool2_backward(gy: np.ndarray, idx: np.ndarray, x_shape) -> np.ndarray:
    """Routes each upstream gradient to the argmax cell of its window."""
    n, c, h, w = x_shape
    oh, ow = h // 2, w // 2
    gwin = np.zeros((n, c, oh, ow, 4), dtype=gy.dtype)
    np.put_along_axis(gwin, idx[..., None].astype(np.intp), gy[..., None], axis=-1)
    gx = np.zeros(x_shape, dtype=gy.dtype)
    gx[:, :, 0 : 2 * oh : 2, 0 : 2 * ow : 2] = gwin[..., 0]
    gx[:, :, 0 : 2 * oh : 2, 1 : 2 * ow : 2] = gwin[..., 1]
    gx[:, :, 1 : 2 * oh : 2, 0 : 2 * ow : 2] = gwin[..., 2]
    gx[:, :, 1 : 2 * oh : 2, 1 : 2 * ow : 2] = gwin[..., 3]
    return gx


def maxpool2(input: Tensor):
    """Tensor-level pooling; returns (Tensor, argmax indices)."""
    y, idx = maxpool2_forward(input.data)
    return Tensor(y), idx


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------

def batchnorm_forward(x: np.ndarray, params: LayerParams, mode: str | None = None):
    """Per-channel batch norm. Train mode normalizes by batch statistics and
    updates the running stats in-place; infer mode uses the stored statistics
    only (deterministic, batch-size independent)."""
    mode = params.mode if mode is None else mode
    dtype = x.dtype
    gamma = params.bn_gamma.astype(dtype, copy=False)
    beta = params.bn_beta.astype(dtype, copy=False)
    eps = dtype.type(params.bn_eps)

    if mode == "infer":
        rm = params.bn_running_mean.astype(dtype, copy=False)
        rv = params.bn_running_var.astype(dtype, copy=False)
        inv = gamma / np.sqrt(rv + eps)
        y = x * inv.reshape(1, -1, 1, 1) + (beta - rm * inv).reshape(1, -1, 1, 1)
        cache = ("infer", inv)
        return y, cache
    if mode != "train":
        raise ValueError(f"batchnorm: unknown mode {mode!r}")

    n, c, h, w = x.shape
    m = n * h * w
    if m < 2:
        raise ShapeError("batchnorm", f"train mode needs >=2 samples per channel, got {m} for input {x.shape}")
    mu = x.mean(axis=(0, 2, 3))
    xc = x - mu.reshape(1, c, 1, 1)
    var = np.mean(xc * xc, axis=(0, 2, 3))
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = xc * ivar.reshape(1, c, 1, 1)
    y = gamma.reshape(1, c, 1, 1) * xhat + beta.reshape(1, c, 1, 1)

    mom = params.bn_momentum
    unbias = m / (m - 1)
    params.bn_running_mean[...] = (1.0 - mom) * params.bn_running_mean + mom * mu
    params.bn_running_var[...] = (1.0 - mom) * params.bn_running_var + mom * var * unbias
    cache = ("train", xhat, ivar, gamma, m)
    return y, cache


def batchnorm_backward(gy: np.ndarray, cache):
    """Returns (gx, ggamma, gbeta) for the cached forward pass."""
    if cache[0] == "infer":
        inv = cache[1]
        gx = gy * inv.reshape(1, -1, 1, 1)
        # xhat is not cached in infer mode; parameter grads are not needed on
        # the inference path.
        return gx, None, None
    _, xhat, ivar, gamma, m = cache
    c = xhat.shape[1]
    gbeta = gy.sum(axis=(0, 2, 3))
    ggamma = (gy * xhat).sum(axis=(0, 2, 3))
    coeff = (gamma * ivar / m).reshape(1, c, 1, 1)
    gx = coeff * (m * gy - gbeta.reshape(1, c, 1, 1) - xhat * ggamma.reshape(1, c, 1, 1))
    return gx, ggamma, gbeta


def batchnorm(input: Tensor, params: LayerParams) -> Tensor:
    """Tensor-level batch norm honoring ``params.mode``."""
    y, _ = batchnorm_forward(input.data, params)
    return Tensor(y)


# ---------------------------------------------------------------------------
# ReLU
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(gy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return gy * (y > 0)


def relu(input: Tensor) -> Tensor:
    return Tensor(relu_forward(input.data))
