"""Region similarity (J), contour accuracy (F) and their sequence statistics."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import as_mask, boundary_pixels, check_same_shape, mask_iou

DEFAULT_RECALL_THRESHOLD = 0.5
N_DECAY_BINS = 4


@dataclass(frozen=True)
class FrameScore:
    j: float
    f: float


@dataclass(frozen=True)
class SequenceStats:
    mean: float
    recall: float
    decay: float


def default_tolerance(shape):
    """Boundary tolerance in pixels: ceil(0.8% of the image diagonal)."""
    h, w = shape[:2]
    return math.ceil(0.008 * math.hypot(h, w))


def region_similarity(pred, gt):
    return mask_iou(pred, gt)


def boundary_precision_recall(pred, gt, tol):
    """Return ``(precision, recall, n_pred, n_gt)`` of the boundary match."""
    pred, gt = as_mask(pred), as_mask(gt)
    check_same_shape(pred, gt, what="masks")
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    bp = np.ascontiguousarray(boundary_pixels(pred), dtype=np.uint8)
    bg = np.ascontiguousarray(boundary_pixels(gt), dtype=np.uint8)
    n_pred, n_gt = int(bp.sum()), int(bg.sum())
    hit_pred = int(kernels.near_mask(bp, bg, float(tol), False).sum())
    hit_gt = int(kernels.near_mask(bg, bp, float(tol), False).sum())
    precision = hit_pred / n_pred if n_pred else 0.0
    recall = hit_gt / n_gt if n_gt else 0.0
    return precision, recall, n_pred, n_gt


def contour_accuracy(pred, gt, tol=None):
    """Boundary F-measure with a Euclidean pixel tolerance."""
    pred = as_mask(pred)
    if tol is None:
        tol = default_tolerance(pred.shape)
    p, r, n_pred, n_gt = boundary_precision_recall(pred, gt, tol)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0 or p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def frame_score(pred, gt, tol=None):
    return FrameScore(region_similarity(pred, gt), contour_accuracy(pred, gt, tol))


def decay_bins(n):
    """Sizes of the contiguous quartile bins; remainders go to earlier bins."""
    base, extra = divmod(n, N_DECAY_BINS)
    return [base + (1 if i < extra else 0) for i in range(N_DECAY_BINS)]


def _bin_mean(values):
    # shift by the first value so a constant bin averages to exactly that value
    v0 = float(values[0])
    return v0 + math.fsum(values - v0) / values.size


def sequence_stats(scores, recall_threshold=DEFAULT_RECALL_THRESHOLD):
    """Mean, recall and decay of per-frame scores (annotated frame excluded)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("sequence_stats needs at least one score")
    mean = float(np.mean(scores))
    recall = float(np.mean(scores > recall_threshold))
    bins, start = [], 0
    for size in decay_bins(scores.size):
        if size:
            bins.append(scores[start:start + size])
        start += size
    # fewer than four frames: compare the first and last non-empty bins
    decay = _bin_mean(bins[0]) - _bin_mean(bins[-1])
    return SequenceStats(mean, recall, decay)


def aggregate_jf(per_sequence):
    """Mean over sequences of ``(J.mean + F.mean) / 2``."""
    per_sequence = list(per_sequence)
    if not per_sequence:
        raise ValueError("aggregate_jf needs at least one sequence")
    return float(np.mean([(j.mean + f.mean) / 2.0 for j, f in per_sequence]))
