"""Loss heads: softmax cross-entropy over class scores and mean squared
error over scalar predictions. Both return (loss, grad-wrt-scores)."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def softmax_xent(scores: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy of a softmax over ``scores``.

    scores: (n, d, 1, 1) or (n, d) class scores.
    labels: (n,) integer class labels, 1-based (class 1 .. d).

    Returns (loss, probs, grad) where grad has the shape of ``scores`` and is
    already divided by the batch size.
    """
    s = scores
    squeeze = False
    if s.ndim == 4:
        if s.shape[2] != 1 or s.shape[3] != 1:
            raise ShapeError("softmax_xent", f"expected (n,d,1,1) scores, got {s.shape}")
        s = s[:, :, 0, 0]
        squeeze = True
    elif s.ndim != 2:
        raise ShapeError("softmax_xent", f"expected 2-D or (n,d,1,1) scores, got {s.shape}")
    n, d = s.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError("softmax_xent", f"labels shape {labels.shape} does not match batch {n}")
    idx = labels.astype(np.int64) - 1
    if idx.min() < 0 or idx.max() >= d:
        raise ShapeError("softmax_xent", f"labels must lie in 1..{d}, got range [{labels.min()}, {labels.max()}]")

    shifted = s - s.max(axis=1, keepdims=True)
    exps = np.exp(shifted.astype(np.float64))
    probs = exps / exps.sum(axis=1, keepdims=True)
    picked = probs[np.arange(n), idx]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())

    grad = probs.astype(scores.dtype)
    grad[np.arange(n), idx] -= 1
    grad /= n
    if squeeze:
        grad = grad.reshape(scores.shape)
    return loss, probs.astype(scores.dtype), grad


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error. pred may be (n,1,1,1), (n,1) or (n,); target (n,).

    Returns (loss, grad) with grad shaped like ``pred`` (already scaled by
    2/n, the exact derivative of the mean of squared residuals).
    """
    p = pred
    if p.ndim == 4:
        if p.shape[1:] != (1, 1, 1):
            raise ShapeError("mse_loss", f"expected (n,1,1,1) predictions, got {p.shape}")
        flat = p[:, 0, 0, 0]
    elif p.ndim == 2 and p.shape[1] == 1:
        flat = p[:, 0]
    elif p.ndim == 1:
        flat = p
    else:
        raise ShapeError("mse_loss", f"expected scalar-per-sample predictions, got {p.shape}")
    target = np.asarray(target, dtype=flat.dtype)
    if target.shape != flat.shape:
        raise ShapeError("mse_loss", f"target shape {target.shape} does not match predictions {flat.shape}")
    n = flat.shape[0]
    diff = (flat.astype(np.float64) - target.astype(np.float64))
    loss = float(np.mean(diff * diff))
    grad = (2.0 / n) * diff
    return loss, grad.astype(pred.dtype).reshape(pred.shape)
