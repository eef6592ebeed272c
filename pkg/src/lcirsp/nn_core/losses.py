"""Loss functions over autograd tensors."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import tensor as T
from .tensor import as_tensor

PROB_FLOOR = 1e-12


def categorical_cross_entropy(probabilities, one_hot):
    """Mean over the batch of -sum(y * log(p)); rows must sum to 1.

    Probabilities are clamped to [1e-12, 1] before the log.
    """
    p = as_tensor(probabilities)
    y = as_tensor(one_hot)
    if p.data.shape != y.data.shape:
        raise ShapeMismatch(f"probabilities {p.data.shape} vs labels {y.data.shape}")
    row_sums = p.data.sum(axis=-1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise ShapeMismatch("probability rows must sum to 1 within 1e-6")
    clamped = T.clip(p, PROB_FLOOR, 1.0)
    per_row = T.sum_(T.mul(y, T.log(clamped)), axis=-1)
    return T.neg(T.mean_all(per_row))


def mse_loss(predictions, targets):
    """Mean squared difference over all elements."""
    pred = as_tensor(predictions)
    target = as_tensor(targets)
    if pred.data.shape != target.data.shape:
        raise ShapeMismatch(f"predictions {pred.data.shape} vs targets {target.data.shape}")
    diff = T.sub(pred, target)
    return T.mean_all(T.mul(diff, diff))


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
