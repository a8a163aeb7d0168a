"""Minimal CNN kernel: tensors, layer primitives, losses, optimizers and
the sequential layer stack used by the resolution networks."""
from .losses import mse_loss, softmax_xent
from .ops import (
    LayerParams,
    batchnorm,
    batchnorm_backward,
    batchnorm_forward,
    conv2d,
    conv2d_backward,
    conv2d_forward,
    maxpool2,
    maxpool2_backward,
    maxpool2_forward,
    relu,
    relu_backward,
    relu_forward,
)
from .optim import OptimizerState, adam_step, sgd_step
from .stack import LayerStack
from .tensor import Tensor

__all__ = [
    "LayerParams",
    "LayerStack",
    "OptimizerState",
    "Tensor",
    "adam_step",
    "batchnorm",
    "batchnorm_backward",
    "batchnorm_forward",
    "conv2d",
    "conv2d_backward",
    "conv2d_forward",
    "maxpool2",
    "maxpool2_backward",
    "maxpool2_forward",
    "mse_loss",
    "relu",
    "relu_backward",
    "relu_forward",
    "sgd_step",
    "softmax_xent",
]
