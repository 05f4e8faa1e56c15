"""Evaluation over mask directories, report formatting and overlays."""
import os
from dataclasses import dataclass, field

import numpy as np

from .core import as_mask, boundary_pixels
from .io import DataError, read_mask
from .metrics import (
    DEFAULT_RECALL_THRESHOLD,
    aggregate_jf,
    contour_accuracy,
    default_tolerance,
    region_similarity,
    sequence_stats,
)

ANNOTATION_TINT = (255, 0, 0)
PREDICTION_TINT = (0, 255, 0)


@dataclass
class SequenceEval:
    name: str
    frames: list
    j: list
    f: list
    j_stats: object
    f_stats: object
    attributes: list = field(default_factory=list)


def _pgm_names(directory):
    return sorted(n for n in os.listdir(directory) if n.endswith(".pgm"))


def sequence_dirs(gt_root):
    """``[(name, gt_dir)]``: the root itself if it holds masks, else its subdirectories."""
    if not os.path.isdir(gt_root):
        raise DataError(f"{gt_root}: not a directory")
    if _pgm_names(gt_root):
        return [(os.path.basename(os.path.normpath(gt_root)), gt_root)]
    subdirs = sorted(
        d for d in os.listdir(gt_root) if os.path.isdir(os.path.join(gt_root, d))
    )
    if not subdirs:
        raise DataError(f"{gt_root}: no ground-truth masks found")
    return [(d, os.path.join(gt_root, d)) for d in subdirs]


def evaluate_sequence(name, gt_dir, pred_dir, tol=None, recall_threshold=DEFAULT_RECALL_THRESHOLD):
    """Score every ground-truth frame except the first (annotated) one."""
    names = _pgm_names(gt_dir)
    if len(names) < 2:
        raise DataError(f"{gt_dir}: need the annotated frame plus at least one more")
    j_scores, f_scores = [], []
    for fname in names[1:]:
        gt = read_mask(os.path.join(gt_dir, fname))
        pred_path = os.path.join(pred_dir, fname)
        if not os.path.exists(pred_path):
            raise DataError(f"{pred_path}: missing prediction for {name}/{fname}")
        pred = read_mask(pred_path)
        if pred.shape != gt.shape:
            raise DataError(f"{pred_path}: prediction is {pred.shape}, ground truth is {gt.shape}")
        t = default_tolerance(gt.shape) if tol is None else tol
        j_scores.append(region_similarity(pred, gt))
        f_scores.append(contour_accuracy(pred, gt, t))
    return SequenceEval(
        name, names[1:], j_scores, f_scores,
        sequence_stats(j_scores, recall_threshold),
        sequence_stats(f_scores, recall_threshold),
    )


def evaluate(gt_root, pred_root, tol=None, recall_threshold=DEFAULT_RECALL_THRESHOLD):
    seqs = sequence_dirs(gt_root)
    single = len(seqs) == 1 and seqs[0][1] == gt_root
    out = []
    for name, gt_dir in seqs:
        pred_dir = pred_root if single else os.path.join(pred_root, name)
        out.append(evaluate_sequence(name, gt_dir, pred_dir, tol, recall_threshold))
    return out


def format_table(evals):
    lines = [f"{'Sequence':<20} {'Measure':<8} {'Mean':>8} {'Recall':>8} {'Decay':>8}"]
    for ev in evals:
        for label, st in (("J", ev.j_stats), ("F", ev.f_stats)):
            lines.append(
                f"{ev.name:<20} {label:<8} {st.mean:8.4f} {st.recall:8.4f} {st.decay:8.4f}"
            )
        lines.append(f"{ev.name:<20} {'J&F':<8} {(ev.j_stats.mean + ev.f_stats.mean) / 2:8.4f}")
    lines.append(f"{'all':<20} {'J&F':<8} {aggregate_jf((e.j_stats, e.f_stats) for e in evals):8.4f}")
    return "\n".join(lines) + "\n"


def format_records(evals):
    """One ``key = value`` record per metric, stable ordering."""
    lines = []
    for ev in evals:
        if ev.attributes:
            lines.append(f"{ev.name}.attributes = {','.join(ev.attributes)}")
        lines.append(f"{ev.name}.frames = {len(ev.frames)}")
        for label, st in (("J", ev.j_stats), ("F", ev.f_stats)):
            lines.append(f"{ev.name}.{label}.mean = {st.mean:.6f}")
            lines.append(f"{ev.name}.{label}.recall = {st.recall:.6f}")
            lines.append(f"{ev.name}.{label}.decay = {st.decay:.6f}")
        lines.append(f"{ev.name}.JF.mean = {(ev.j_stats.mean + ev.f_stats.mean) / 2:.6f}")
    if evals:
        pairs = [(e.j_stats, e.f_stats) for e in evals]
        lines.append(f"all.J.mean = {np.mean([j.mean for j, _ in pairs]):.6f}")
        lines.append(f"all.F.mean = {np.mean([f.mean for _, f in pairs]):.6f}")
        lines.append(f"all.JF.mean = {aggregate_jf(pairs):.6f}")
    return "\n".join(lines) + "\n"


def render_overlay(frame, mask, tint, alpha=0.5):
    """Blend ``tint`` into ``frame`` over the mask; the mask outline is drawn solid."""
    frame = np.asarray(frame, dtype=np.float64)
    mask = as_mask(mask)
    out = frame.copy()
    color = np.asarray(tint, dtype=np.float64)
    out[mask] = (1.0 - alpha) * frame[mask] + alpha * color
    out[boundary_pixels(mask)] = color
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
