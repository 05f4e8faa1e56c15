"""Sequence-level orchestration.

Frame 0 is used once: semantic selection, the appearance head and the two
conditional classifiers are all fit on it and then frozen. Every later frame
is a pure function of that frozen state and its own inputs, so frames can be
processed in any order and by any number of workers with identical output.
Self-training on pseudo-labels of later frames would attach between training
and ``process_frame``; it is not done here because it couples frames.
"""
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .appearance import Balance, TrainConfig, extract_features, one_shot_train
from .conditional import (
    DEFAULT_SIGMA,
    build_prior,
    conditional_predict,
    first_round_estimate,
    train_conditional,
)
from .core import as_mask
from .semantics import (
    DEFAULT_MIN_GAIN,
    DEFAULT_MIN_OVERLAP,
    DEFAULT_POOL_SIZE,
    SemanticModel,
    propagate_indices,
    select_indices,
)
from .snapping import DEFAULT_DIST, DEFAULT_RHO, DEFAULT_TAU, DEFAULT_VOTE, snap_frame

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, frame, stage, cause):
        super().__init__(f"frame {frame}, stage '{stage}': {cause}")
        self.frame = frame
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    learning_rate: float = 1.0
    iterations: int = 500
    seed: int = 0
    balance: str = Balance.CLASS_BALANCED.value
    sigma: float = DEFAULT_SIGMA
    pool_size: int = DEFAULT_POOL_SIZE
    min_gain: float = DEFAULT_MIN_GAIN
    min_overlap: float = DEFAULT_MIN_OVERLAP
    snapping: bool = True
    tau: float = DEFAULT_TAU
    dist: int = DEFAULT_DIST
    rho: float = DEFAULT_RHO
    vote: float = DEFAULT_VOTE
    threshold: float = 0.5

    def __post_init__(self):
        Balance(self.balance)
        TrainConfig(self.learning_rate, self.iterations, self.seed)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if not 0.0 <= self.min_overlap < 1.0:
            raise ValueError("min_overlap must lie in [0, 1)")
        if not 0.0 < self.tau < 1.0 or not 0.0 < self.vote < 1.0:
            raise ValueError("tau and vote must lie in (0, 1)")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if self.dist < 0:
            raise ValueError("dist must be non-negative")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    @property
    def train(self):
        return TrainConfig(self.learning_rate, self.iterations, self.seed)

    @property
    def loss(self):
        return Balance(self.balance)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise TypeError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FrozenModel:
    """Everything later frames need from frame 0."""

    head: np.ndarray
    conditional: object
    model: SemanticModel
    cfg: PipelineConfig


@dataclass
class SequenceResult:
    masks: list
    probabilities: list
    provenance: list
    model: SemanticModel
    selected: list
    timings: dict = field(default_factory=dict)
    frozen: FrozenModel = None


@contextmanager
def _stage(timings, name, frame):
    t0 = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(frame, name, exc) from exc
    finally:
        timings[name] += (time.perf_counter() - t0) * 1000.0


def fit_first_frame(frame0, gt0, proposals0, cfg, timings=None):
    """Semantic selection and one-shot training on the annotated frame.

    Returns ``(frozen, selected_indices)``.
    """
    timings = timings if timings is not None else defaultdict(float)
    gt0 = as_mask(gt0)
    with _stage(timings, "features", 0):
        feats = extract_features(frame0)
        if feats.shape[:2] != gt0.shape:
            raise ValueError(f"frame 0 is {feats.shape[:2]}, annotation is {gt0.shape}")
    with _stage(timings, "selection", 0):
        if proposals0:
            selected, _ = select_indices(gt0, proposals0, cfg.pool_size, cfg.min_gain)
        else:
            log.warning("no proposals on the annotated frame; semantic model is empty")
            selected = []
        model = SemanticModel.from_categories(proposals0[i].category for i in selected)
    with _stage(timings, "train_head", 0):
        head = one_shot_train(feats, gt0, cfg.train, cfg.loss).params
    with _stage(timings, "train_conditional", 0):
        prior = build_prior([proposals0[i].mask for i in selected], cfg.sigma, gt0.shape)
        cond = train_conditional(feats, gt0, prior, cfg.train, cfg.loss).params
    return FrozenModel(head, cond, model, cfg), selected


def process_frame(frozen, index, frame, proposals, contour):
    """Segment one frame. Returns ``(mask, probability, selected, timings)``."""
    cfg = frozen.cfg
    timings = defaultdict(float)
    with _stage(timings, "features", index):
        feats = extract_features(frame)
    with _stage(timings, "first_round", index):
        first = first_round_estimate(frozen.head, feats, cfg.threshold)
    with _stage(timings, "propagation", index):
        selected = propagate_indices(frozen.model, proposals, first, cfg.min_overlap)
    with _stage(timings, "prior", index):
        prior = build_prior([proposals[i].mask for i in selected], cfg.sigma, first.shape)
    with _stage(timings, "conditional", index):
        prob = conditional_predict(frozen.conditional, feats, prior).values
        mask = prob > cfg.threshold
    if cfg.snapping and contour is not None:
        with _stage(timings, "snapping", index):
            mask = snap_frame(mask, contour, cfg.tau, cfg.dist, cfg.rho, cfg.vote)
    return mask, prob, selected, dict(timings)


_WORKER_STATE = {}


def _init_worker(frozen):
    _WORKER_STATE["frozen"] = frozen


def _worker(task):
    return process_frame(_WORKER_STATE["frozen"], *task)


def _frame_inputs(i, frames, proposals, contours):
    props = proposals[i] if proposals is not None and i < len(proposals) else []
    contour = contours[i] if contours is not None and i < len(contours) else None
    return (i, frames[i], props, contour)


def run_sequence(frames, gt0, proposals=None, contours=None, cfg=PipelineConfig(), jobs=1, order=None):
    """Segment frames 1..N-1 given the frame-0 annotation.

    ``order`` optionally fixes the processing order of the frame indices;
    results are stored by frame index and do not depend on it.
    """
    if not frames:
        raise ValueError("a sequence needs at least the annotated frame")
    timings = defaultdict(float)
    props0 = proposals[0] if proposals else []
    frozen, selected = fit_first_frame(frames[0], gt0, props0, cfg, timings)

    indices = list(range(1, len(frames))) if order is None else list(order)
    if sorted(indices) != list(range(1, len(frames))):
        raise ValueError("order must be a permutation of the frame indices 1..N-1")
    tasks = [_frame_inputs(i, frames, proposals, contours) for i in indices]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(frozen,)) as pool:
            outputs = list(pool.map(_worker, tasks))
    else:
        outputs = [process_frame(frozen, *t) for t in tasks]

    n_out = len(frames) - 1
    masks, probs, provenance = [None] * n_out, [None] * n_out, [None] * n_out
    for i, (mask, prob, sel, frame_t) in zip(indices, outputs):
        masks[i - 1], probs[i - 1], provenance[i - 1] = mask, prob, sel
        for stage, ms in frame_t.items():
            timings[stage] += ms
    return SequenceResult(
        masks=masks,
        probabilities=probs,
        provenance=provenance,
        model=frozen.model,
        selected=selected,
        timings=dict(timings),
        frozen=frozen,
    )


def appearance_baseline(frames, gt0, cfg=PipelineConfig()):
    """Appearance-only segmentation of frames 1..N-1 (no semantics, no snapping)."""
    head = one_shot_train(extract_features(frames[0]), gt0, cfg.train, cfg.loss).params
    return [first_round_estimate(head, extract_features(f), cfg.threshold) for f in frames[1:]]


def flatten_objects(masks, probabilities):
    """Label map (0 = background, k + 1 = object k) resolving overlaps by the
    higher fused probability, ties to the lower object id."""
    masks = np.stack([as_mask(m) for m in masks])
    probs = np.stack([np.asarray(p, dtype=np.float64) for p in probabilities])
    scored = np.where(masks, probs, -np.inf)
    winner = np.argmax(scored, axis=0)
    return np.where(masks.any(axis=0), winner + 1, 0).astype(np.int32)


@dataclass
class MultiObjectResult:
    objects: list
    labels: list


def run_multiobject(frames, gt0_per_object, proposals=None, contours=None, cfg=PipelineConfig(), jobs=1):
    """Run every object independently and flatten the per-frame outputs."""
    gts = [as_mask(g) for g in gt0_per_object]
    if not gts:
        raise ValueError("at least one object annotation is required")
    if len({g.shape for g in gts}) != 1:
        raise ValueError("object annotations must share frame dimensions")
    results = [run_sequence(frames, g, proposals, contours, cfg, jobs) for g in gts]
    labels = [
        flatten_objects([r.masks[t] for r in results], [r.probabilities[t] for r in results])
        for t in range(len(frames) - 1)
    ]
    return MultiObjectResult(results, labels)
