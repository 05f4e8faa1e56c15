"""Conditional classifier: two appearance classifiers gated by a semantic
weight map ``w``.

Forward: ``f_out = w * f1 + (1 - w) * f2``.  Backward: the gradient arriving
at ``f_out`` is split as ``g1 = w * g_top`` and ``g2 = (1 - w) * g_top``.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .appearance import (
    EPS,
    Balance,
    DivergenceError,
    TrainConfig,
    TrainResult,
    _nll,
    activation,
    class_weights,
    exact_matvec,
    exact_sum,
    is_degenerate,
    predict,
    sigmoid,
)
from .core import (
    DimensionError,
    ScoreMap,
    as_graymap,
    as_mask,
    as_weightmap,
    check_same_shape,
    gaussian_smooth,
)

log = logging.getLogger(__name__)

DEFAULT_SIGMA = 5.0


@dataclass(frozen=True)
class ConditionalParams:
    fg: np.ndarray
    bg: np.ndarray

    def __post_init__(self):
        if np.shape(self.fg) != np.shape(self.bg):
            raise ValueError("foreground and background parameter vectors differ in length")


class GradientPair(NamedTuple):
    g1: np.ndarray
    g2: np.ndarray


def fuse(f1, f2, w):
    """Blend two score maps with the weight map.

    The result is clipped to ``[min(f1, f2), max(f1, f2)]`` per pixel, which
    is a no-op in exact arithmetic but makes ``fuse(f, f, w) == f`` hold
    bitwise and keeps probabilities inside [0, 1].
    """
    if f1.scale is not f2.scale:
        raise ValueError(f"cannot fuse {f1.scale.value} with {f2.scale.value} score maps")
    w = as_weightmap(w)
    check_same_shape(f1.values, f2.values, w, what="score maps and weight map")
    a, b = f1.values, f2.values
    out = w * a + (1.0 - w) * b
    return ScoreMap(np.clip(out, np.minimum(a, b), np.maximum(a, b)), f1.scale)


def route_gradient(g_top, w):
    g_top = as_graymap(g_top)
    w = as_weightmap(w)
    check_same_shape(g_top, w, what="gradient and weight map")
    g1 = w * g_top
    # the complement is taken from g_top so that g1 + g2 reproduces it
    g2 = g_top - g1
    return GradientPair(g1, g2)


def build_prior(selected_masks, sigma=DEFAULT_SIGMA, shape=None):
    """Gaussian-smoothed union of the selected instance masks, in [0, 1]."""
    masks = [as_mask(m) for m in selected_masks]
    if shape is None:
        if not masks:
            raise ValueError("frame shape is required when no masks are selected")
        shape = masks[0].shape
    shape = tuple(shape)
    for m in masks:
        if m.shape != shape:
            raise DimensionError(f"selected mask shape {m.shape} differs from frame shape {shape}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    union = np.zeros(shape, dtype=bool)
    for m in masks:
        union |= m
    if not union.any():
        return np.zeros(shape)
    return gaussian_smooth(union.astype(np.float64), sigma)


def conditional_predict(params, feats, w):
    return fuse(predict(params.fg, feats), predict(params.bg, feats), w)


def _joint_terms(fg, bg, flat, w):
    s1 = sigmoid(activation(fg, flat))
    s2 = sigmoid(activation(bg, flat))
    p = np.clip(w * s1 + (1.0 - w) * s2, np.minimum(s1, s2), np.maximum(s1, s2))
    return s1, s2, p


def joint_loss(params, feats, truth, w, balance=Balance.CLASS_BALANCED):
    truth = as_mask(truth)
    w = as_weightmap(w)
    check_same_shape(feats, truth, w, what="features, truth and weight map")
    p = conditional_predict(params, feats, w).values
    return exact_sum(class_weights(truth, balance) * _nll(p, truth)) + 0.0


def _fused_output_gradient(p, y, cw):
    # d loss / d p_out; zero where the clamp is active
    with np.errstate(divide="ignore"):
        g = cw * np.where(y, -1.0 / p, 1.0 / (1.0 - p))
    return np.where((p > EPS) & (p < 1.0 - EPS), g, 0.0)


def joint_gradient(params, feats, truth, w, balance=Balance.CLASS_BALANCED):
    """Return ``(grad_fg, grad_bg)`` of :func:`joint_loss`."""
    truth = as_mask(truth)
    w = as_weightmap(w)
    check_same_shape(feats, truth, w, what="features, truth and weight map")
    flat = feats.reshape(-1, feats.shape[-1])
    y = truth.ravel()
    cw = class_weights(truth, balance).ravel()
    s1, s2, p = _joint_terms(params.fg, params.bg, flat, w.ravel())
    return _param_gradients(flat, s1, s2, p, y, cw, w)


def _param_gradients(flat, s1, s2, p, y, cw, w):
    g_top = _fused_output_gradient(p, y, cw).reshape(w.shape)
    g1, g2 = route_gradient(g_top, w)
    grad_fg = exact_matvec(flat, g1.ravel() * s1 * (1.0 - s1))
    grad_bg = exact_matvec(flat, g2.ravel() * s2 * (1.0 - s2))
    return grad_fg, grad_bg


def train_conditional(feats, truth, w, cfg=TrainConfig(), balance=Balance.CLASS_BALANCED):
    """Jointly train both classifiers from zero on the fused probability.

    Steps use ``lr * grad / n_pixels`` as in :func:`one_shot_train`.
    """
    truth = as_mask(truth)
    w = as_weightmap(w)
    check_same_shape(feats, truth, w, what="features, truth and weight map")
    degenerate = is_degenerate(truth)
    if degenerate:
        log.warning("degenerate annotation: one class is empty, loss is identically zero")
    flat = feats.reshape(-1, feats.shape[-1])
    y = truth.ravel()
    cw = class_weights(truth, balance).ravel()
    wf = w.ravel()
    n = y.size
    fg = np.zeros(feats.shape[-1])
    bg = np.zeros(feats.shape[-1])
    losses = []
    for _ in range(cfg.iterations):
        s1, s2, p = _joint_terms(fg, bg, flat, wf)
        loss = exact_sum(cw * _nll(p, y))
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite loss after {len(losses)} iterations")
        losses.append(loss)
        grad_fg, grad_bg = _param_gradients(flat, s1, s2, p, y, cw, w)
        fg = fg - cfg.learning_rate * grad_fg / n
        bg = bg - cfg.learning_rate * grad_bg / n
    params = ConditionalParams(fg, bg)
    if cfg.iterations:
        final = joint_loss(params, feats, truth, w, balance)
        losses.append(final)
        if not math.isfinite(final) or final > losses[0]:
            raise DivergenceError(f"training diverged: loss {losses[0]:.6g} -> {final:.6g}")
    return TrainResult(params=params, losses=losses, degenerate=degenerate)


def first_round_estimate(params, feats, threshold=0.5):
    """Threshold the appearance-only prediction; ``p == threshold`` is background."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return predict(params, feats).values > threshold
