"""Detection and classification losses, built from autograd primitives.

Model probabilities are clamped to [EPS, 1 - EPS] before any log so the
losses stay finite even for saturated predictions.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ShapeError

EPS = 1e-7

# margin-loss constants (standard values)
MARGIN_POS = 0.9
MARGIN_NEG = 0.1
MARGIN_LAMBDA = 0.5


def _bce_terms(pred: Tensor, target: np.ndarray) -> Tensor:
    p = ag.clamp(pred, EPS, 1.0 - EPS)
    t = Tensor(target)
    one_minus_t = Tensor(1.0 - target)
    pos = ag.mul(t, ag.log(p))
    negp = ag.log(ag.sub(1.0, p))
    neg_term = ag.mul(one_minus_t, negp)
    return ag.neg(ag.add(pos, neg_term))


def bce_loss(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy between probabilities and [0, 1] targets."""
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ShapeError(f"bce_loss: shapes {pred.data.shape} vs {target.shape}")
    return ag.reduce(_bce_terms(pred, target), "mean")


def masked_bce_loss(pred: Tensor, target, valid) -> Tensor:
    """BCE averaged over pixels where `valid` is nonzero; zero if none are."""
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    valid = np.asarray(valid, dtype=np.float64)
    if pred.data.shape != target.shape or pred.data.shape != valid.shape:
        raise ShapeError(
            f"masked_bce_loss: shapes {pred.data.shape}, {target.shape}, {valid.shape}"
        )
    count = float(valid.sum())
    if count == 0.0:
        return Tensor(0.0)
    terms = ag.mul(_bce_terms(pred, target), Tensor(valid))
    return ag.mul(ag.reduce(terms, "sum"), 1.0 / count)


def margin_loss(class_scores: Tensor, labels) -> Tensor:
    """Margin loss on per-class sigmoid scores against one-hot labels.

    Present classes are pushed above MARGIN_POS, absent ones below
    MARGIN_NEG, with the absent side down-weighted by MARGIN_LAMBDA.
    """
    scores = class_scores if isinstance(class_scores, Tensor) else Tensor(class_scores)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.data.ndim != 2 or scores.data.shape != labels.shape:
        raise ShapeError(f"margin_loss: shapes {scores.data.shape} vs {labels.shape}")
    if not np.all((labels == 0.0) | (labels == 1.0)) or not np.all(labels.sum(axis=1) == 1.0):
        raise ValueError("margin_loss: label rows must be one-hot")
    n = scores.data.shape[0]
    t = Tensor(labels)
    one_minus_t = Tensor(1.0 - labels)
    pos = ag.mul(t, ag.square(ag.relu(ag.sub(MARGIN_POS, scores))))
    neg = ag.mul(one_minus_t, ag.square(ag.relu(ag.sub(scores, MARGIN_NEG))))
    total = ag.add(ag.reduce(pos, "sum"), ag.mul(ag.reduce(neg, "sum"), MARGIN_LAMBDA))
    return ag.mul(total, 1.0 / n)


def one_hot(class_id: int, num_classes: int) -> np.ndarray:
    if not 0 <= class_id < num_classes:
        raise ValueError(f"class id {class_id} outside [0, {num_classes})")
    row = np.zeros(num_classes, dtype=np.float64)
    row[class_id] = 1.0
    return row
