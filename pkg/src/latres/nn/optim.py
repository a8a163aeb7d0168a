"""Optimizers: SGD with momentum (and decoupled-into-gradient weight decay)
and Adam. State lives in an OptimizerState holding one slot set per
parameter array; steps update parameters in place."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class OptimizerState:
    kind: str                                   # {"sgd", "adam"}
    momentum: float = 0.9
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    slots: list = field(default_factory=list)   # per-param ndarrays (sgd: v; adam: (m, v))

    @classmethod
    def sgd_momentum(cls, params: list[np.ndarray], momentum: float = 0.9,
                     weight_decay: float = 0.0) -> "OptimizerState":
        return cls(
            kind="sgd",
            momentum=momentum,
            weight_decay=weight_decay,
            slots=[np.zeros_like(p) for p in params],
        )

    @classmethod
    def adam(cls, params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "OptimizerState":
        return cls(
            kind="adam",
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            slots=[(np.zeros_like(p), np.zeros_like(p)) for p in params],
        )


def _check_aligned(params, grads, state: OptimizerState, op: str):
    if len(params) != len(grads) or len(params) != len(state.slots):
        raise ShapeError(op, f"{len(params)} params, {len(grads)} grads, {len(state.slots)} state slots")


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray],
             state: OptimizerState, lr: float) -> None:
    """v <- mu*v + (g + wd*theta); theta <- theta - lr*v, all in place."""
    _check_aligned(params, grads, state, "sgd_step")
    mu = state.momentum
    wd = state.weight_decay
    for p, g, v in zip(params, grads, state.slots):
        if g.shape != p.shape:
            raise ShapeError("sgd_step", f"grad shape {g.shape} != param shape {p.shape}")
        eff = g if wd == 0.0 else g + wd * p
        v *= mu
        v += eff
        p -= lr * v
    state.step_count += 1


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: OptimizerState, lr: float) -> None:
    """Adam with bias correction; moments stored per parameter array."""
    _check_aligned(params, grads, state, "adam_step")
    state.step_count += 1
    t = state.step_count
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, (m, v) in zip(params, grads, state.slots):
        if g.shape != p.shape:
            raise ShapeError("adam_step", f"grad shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / c1
        vhat = v / c2
        p -= lr * mhat / (np.sqrt(vhat) + eps)


def step(params, grads, state: OptimizerState, lr: float) -> None:
    """Dispatch on state.kind."""
    if state.kind == "sgd":
        sgd_step(params, grads, state, lr)
    elif state.kind == "adam":
        adam_step(params, grads, state, lr)
    else:
        raise ValueError(f"unknown optimizer kind {state.kind!r}")
