"""One-shot appearance model: logistic regression over per-pixel features,
trained on the annotated first frame with a class-balanced cross-entropy.

Reductions over pixels use :func:`math.fsum`, which is exactly rounded and
therefore independent of summation order; training is bit-reproducible and
invariant to any consistent permutation of the pixels.
"""
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Scale, ScoreMap, as_mask, check_same_shape

log = logging.getLogger(__name__)

EPS = 1e-12
N_FEATURES = 6


class Balance(enum.Enum):
    CLASS_BALANCED = "class_balanced"
    UNBALANCED = "unbalanced"


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or ended above its starting loss."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    iterations: int = 500
    # zero initialisation makes the run seed-free; kept so runs can be tagged
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass
class TrainResult:
    params: object
    losses: list = field(default_factory=list)
    degenerate: bool = False


def sigmoid(a):
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def exact_sum(values):
    return math.fsum(np.ravel(values).tolist())


def exact_matvec(feats2d, weights):
    """``feats2d.T @ weights`` with every column reduced by fsum."""
    return np.array(
        [exact_sum(feats2d[:, k] * weights) for k in range(feats2d.shape[1])]
    )


def extract_features(image):
    """Per-pixel ``[1, R/255, G/255, B/255, x/(W-1), y/(H-1)]`` features."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 RGB raster, got shape {image.shape}")
    h, w = image.shape[:2]
    feats = np.empty((h, w, N_FEATURES), dtype=np.float64)
    feats[..., 0] = 1.0
    feats[..., 1:4] = image.astype(np.float64) / 255.0
    xs = np.arange(w) / (w - 1) if w > 1 else np.full(w, 0.5)
    ys = np.arange(h) / (h - 1) if h > 1 else np.full(h, 0.5)
    feats[..., 4] = xs[None, :]
    feats[..., 5] = ys[:, None]
    return feats


def _check_params(params, feats):
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != feats.shape[-1]:
        raise ValueError(
            f"parameter length {params.shape} does not match {feats.shape[-1]} feature channels"
        )
    return params


def activation(params, feats):
    # per-channel accumulation keeps each pixel's value independent of its
    # position in the array (BLAS kernels may round tail rows differently)
    params = _check_params(params, feats)
    out = feats[..., 0] * params[0]
    for k in range(1, params.shape[0]):
        out = out + feats[..., k] * params[k]
    return out


def predict(params, feats):
    return ScoreMap(sigmoid(activation(params, feats)), Scale.PROBABILITY)


def class_weights(truth, balance):
    """Per-pixel loss weights (beta on positives, 1 - beta on negatives)."""
    truth = as_mask(truth)
    if Balance(balance) is Balance.UNBALANCED:
        return np.ones(truth.shape)
    beta = np.count_nonzero(~truth) / truth.size
    return np.where(truth, beta, 1.0 - beta)


def is_degenerate(truth):
    n_pos = np.count_nonzero(truth)
    return n_pos == 0 or n_pos == truth.size


def _nll(p, y):
    p = np.clip(p, EPS, 1.0 - EPS)
    return np.where(y, -np.log(p), -np.log1p(-p))


def pixel_losses(prob, truth, balance):
    """Weighted per-pixel cross-entropy terms (probabilities clamped to eps)."""
    return class_weights(truth, balance) * _nll(prob, truth)


def balanced_loss(pred, truth, balance=Balance.CLASS_BALANCED):
    prob = pred.values if isinstance(pred, ScoreMap) else np.asarray(pred, dtype=np.float64)
    if isinstance(pred, ScoreMap) and pred.scale is not Scale.PROBABILITY:
        raise ValueError("balanced_loss needs a probability-scale score map")
    truth = as_mask(truth)
    check_same_shape(prob, truth, what="prediction and truth")
    # -0.0 from all-zero weights is reported as 0.0
    return exact_sum(pixel_losses(prob, truth, balance)) + 0.0


def loss_gradient(params, feats, truth, balance=Balance.CLASS_BALANCED):
    """Gradient of ``balanced_loss(predict(params, feats))`` w.r.t. the weights:
    sum over pixels of ``c_j (p_j - y_j) phi_j``."""
    truth = as_mask(truth)
    check_same_shape(feats, truth, what="features and truth")
    p = predict(params, feats).values
    resid = class_weights(truth, balance) * (p - truth)
    return exact_matvec(feats.reshape(-1, feats.shape[-1]), resid.ravel())


def one_shot_train(feats, truth, cfg=TrainConfig(), balance=Balance.CLASS_BALANCED):
    """Full-batch gradient descent from zero weights.

    The step is ``lr * grad / n_pixels``, i.e. descent on the per-pixel mean
    of the loss, so a fixed learning rate behaves the same across frame sizes.
    """
    truth = as_mask(truth)
    check_same_shape(feats, truth, what="features and truth")
    degenerate = is_degenerate(truth)
    if degenerate:
        log.warning("degenerate annotation: one class is empty, loss is identically zero")
    flat = feats.reshape(-1, feats.shape[-1])
    y = truth.ravel()
    cw = class_weights(truth, balance).ravel()
    n = y.size
    params = np.zeros(feats.shape[-1])
    losses = []
    for _ in range(cfg.iterations):
        p = sigmoid(activation(params, flat))
        loss = exact_sum(cw * _nll(p, y))
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite loss after {len(losses)} iterations")
        losses.append(loss)
        grad = exact_matvec(flat, cw * (p - y))
        params = params - cfg.learning_rate * grad / n
    if cfg.iterations:
        final = balanced_loss(predict(params, feats), truth, balance)
        losses.append(final)
        if not math.isfinite(final) or final > losses[0]:
            raise DivergenceError(f"training diverged: loss {losses[0]:.6g} -> {final:.6g}")
    return TrainResult(params=params, losses=losses, degenerate=degenerate)
