"""4-D tensor container used by the differentiable kernel.

Everything in the kernel operates on (batch, channel, height, width)
float arrays. The container is deliberately thin: the two network
architectures in this toolkit are differentiated explicitly, so there is
no autodiff graph to hang off it.
"""
from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError


class Tensor:
    """A 4-D numeric array with an optional gradient of the same shape."""

    __slots__ = ("data", "grad")

    def __init__(self, data, grad=None):
        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError("Tensor", f"expected 4-D (n,c,h,w), got shape {data.shape}")
        self.data = data
        self.grad = None
        if grad is not None:
            self.set_grad(grad)

    @classmethod
    def zeros(cls, shape, dtype=np.float32) -> "Tensor":
        return cls(np.zeros(shape, dtype=dtype))

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def set_grad(self, grad) -> None:
        grad = np.asarray(grad)
        if grad.shape != self.data.shape:
            raise ShapeError(
                "Tensor.grad",
                f"gradient shape {grad.shape} does not match data shape {self.data.shape}",
            )
        self.grad = grad

    def assert_finite(self, what: str = "tensor") -> None:
        if not np.all(np.isfinite(self.data)):
            raise NumericError(f"{what}: non-finite values in data")
        if self.grad is not None and not np.all(np.isfinite(self.grad)):
            raise NumericError(f"{what}: non-finite values in grad")

    def copy(self) -> "Tensor":
        t = Tensor(self.data.copy())
        if self.grad is not None:
            t.grad = self.grad.copy()
        return t

    def __repr__(self):
        state = "set" if self.grad is not None else "none"
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={state})"
