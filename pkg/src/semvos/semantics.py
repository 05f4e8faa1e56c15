"""Semantic selection on the annotated frame and propagation to later frames.

Proposals come from an external instance segmenter; categories are opaque
strings and are only compared for equality.
"""
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, as_mask, mask_iou

DEFAULT_POOL_SIZE = 20
DEFAULT_MIN_GAIN = 0.01
DEFAULT_MIN_OVERLAP = 0.1
DUPLICATE_IOU = 0.5


@dataclass(frozen=True)
class InstanceProposal:
    mask: np.ndarray
    category: str
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "mask", as_mask(self.mask))
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class SemanticModel:
    """Categories of the selected instances with their counts, in order of
    first selection."""

    entries: tuple = ()

    def __post_init__(self):
        cats = [c for c, _ in self.entries]
        if len(set(cats)) != len(cats):
            raise ValueError("categories must be unique")
        if any(n < 1 for _, n in self.entries):
            raise ValueError("instance counts must be >= 1")

    @classmethod
    def from_categories(cls, categories):
        return cls(tuple(Counter(categories).items()))

    def as_dict(self):
        return dict(self.entries)

    def __len__(self):
        return sum(n for _, n in self.entries)

    def __str__(self):
        if not self.entries:
            return "{}"
        return "{" + ", ".join(f"{c}:{n}" for c, n in self.entries) + "}"


def _check_dims(shape, proposals):
    for i, p in enumerate(proposals):
        if p.mask.shape != shape:
            raise DimensionError(
                f"proposal {i} has shape {p.mask.shape}, frame has shape {shape}"
            )


def confidence_pool(proposals, pool_size):
    """Indices of the ``pool_size`` most confident proposals (stable on ties)."""
    order = sorted(range(len(proposals)), key=lambda i: (-proposals[i].confidence, i))
    return order[:pool_size]


def select_indices(gt, proposals, pool_size=DEFAULT_POOL_SIZE, min_gain=DEFAULT_MIN_GAIN):
    """Greedy search for the proposals whose union best matches ``gt``.

    Returns ``(indices, ious)`` where ``ious[k]`` is the union IoU after the
    ``k``-th pick.
    """
    gt = as_mask(gt)
    if not proposals:
        raise ValueError("semantic selection needs at least one proposal")
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    _check_dims(gt.shape, proposals)

    remaining = confidence_pool(proposals, pool_size)
    union = np.zeros_like(gt)
    current = 0.0
    chosen, ious = [], []
    while remaining:
        scores = [mask_iou(union | proposals[i].mask, gt) for i in remaining]
        best = int(np.argmax(scores))  # first maximum: pool order breaks ties
        gain = scores[best] - current
        if chosen and gain < min_gain:
            break
        if not chosen and scores[best] <= 0.0:
            break
        idx = remaining.pop(best)
        chosen.append(idx)
        union |= proposals[idx].mask
        current = scores[best]
        ious.append(current)
    return chosen, ious


def semantic_selection(gt, proposals, pool_size=DEFAULT_POOL_SIZE, min_gain=DEFAULT_MIN_GAIN):
    idx, _ = select_indices(gt, proposals, pool_size, min_gain)
    chosen = [proposals[i] for i in idx]
    return SemanticModel.from_categories(p.category for p in chosen), chosen


def propagate_indices(model, proposals, first_round, min_overlap=DEFAULT_MIN_OVERLAP):
    """Indices of the proposals matching ``model`` on one frame."""
    first_round = as_mask(first_round)
    if not 0.0 <= min_overlap < 1.0:
        raise ValueError("min_overlap must lie in [0, 1)")
    _check_dims(first_round.shape, proposals)

    taken = []
    for category, count in model.entries:
        ranked = []
        for i, p in enumerate(proposals):
            if p.category != category:
                continue
            iou = mask_iou(p.mask, first_round)
            if iou > min_overlap:
                ranked.append((-iou, -p.confidence, i))
        ranked.sort()
        picked = 0
        for _, _, i in ranked:
            if picked == count:
                break
            if any(mask_iou(proposals[i].mask, proposals[j].mask) > DUPLICATE_IOU for j in taken):
                continue
            taken.append(i)
            picked += 1
    return taken


def semantic_propagation(model, proposals, first_round, min_overlap=DEFAULT_MIN_OVERLAP):
    return [proposals[i] for i in propagate_indices(model, proposals, first_round, min_overlap)]


def load_proposals(path, n_frames=None):
    """Read a proposal manifest and its masks; see :mod:`semvos.io`."""
    from .io import load_proposals as _load

    return _load(path, n_frames)
