"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""
import itertools
import os
import sys
import tempfile
import time

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from semvos import gradcheck
from semvos.cli import main as cli_main
from semvos.conditional import fuse, route_gradient
from semvos.core import Scale, ScoreMap, boundary_pixels
from semvos.io import read_graymap, read_mask, read_pgm, write_graymap, write_mask
from semvos.metrics import contour_accuracy, region_similarity, sequence_stats
from semvos.pipeline import PipelineConfig, appearance_baseline, run_sequence
from semvos.semantics import InstanceProposal, select_indices
from semvos.snapping import recover_thin_structures, snap_to_superpixels, superpixels_from_contours

from synthetic import RETURN_FRAME, distractor_sequence, write_sequence

SEED = 20240607


def report(number, title, checks, capsys=None):
    """Print ``ACCEPTANCE <n> PASS|FAIL <title> [details]`` and return the verdict."""
    ok = all(passed for _, passed in checks)
    detail = "; ".join(name if passed else f"FAILED {name}" for name, passed in checks)
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


# -- 1 ------------------------------------------------------------------------

def criterion_gradients():
    t0 = time.perf_counter()
    err_app = gradcheck.check_appearance(50, seed=0)
    err_cond = gradcheck.check_conditional(50, seed=1)
    elapsed = time.perf_counter() - t0
    return [
        (f"appearance max rel err {err_app:.2e} <= 1e-4", err_app <= 1e-4),
        (f"conditional max rel err {err_cond:.2e} <= 1e-4", err_cond <= 1e-4),
        (f"runtime {elapsed:.2f}s < 10s", elapsed < 10.0),
    ]


# -- 2 ------------------------------------------------------------------------

def criterion_fusion():
    rng = np.random.default_rng(SEED)
    identity_ok = agree_ok = conserve_ok = True
    worst_ulps = 0.0
    for _ in range(1000):
        shape = tuple(rng.integers(1, 17, 2))
        f1 = ScoreMap(rng.random(shape), Scale.PROBABILITY)
        f2 = ScoreMap(rng.random(shape), Scale.PROBABILITY)
        ones, zeros = np.ones(shape), np.zeros(shape)
        w = rng.random(shape)
        identity_ok &= np.array_equal(fuse(f1, f2, ones).values, f1.values)
        identity_ok &= np.array_equal(fuse(f1, f2, zeros).values, f2.values)
        agree_ok &= np.array_equal(fuse(f1, f1, w).values, f1.values)
        g_top = rng.normal(size=shape) * 10.0 ** rng.uniform(-3, 3)
        g1, g2 = route_gradient(g_top, w)
        ulps = np.abs((g1 + g2) - g_top) / np.spacing(np.abs(g_top))
        worst_ulps = max(worst_ulps, float(ulps.max()))
        conserve_ok &= bool(np.all(ulps <= 1.0))
    return [
        ("w=1 gives f1 and w=0 gives f2 bitwise", identity_ok),
        ("fuse(f, f, w) == f bitwise", agree_ok),
        (f"g1 + g2 within 1 ulp of g_top (worst {worst_ulps:.2f} ulp)", conserve_ok),
    ]


# -- 3 ------------------------------------------------------------------------

def iou_oracle(a, b):
    pa = {tuple(p) for p in np.argwhere(a)}
    pb = {tuple(p) for p in np.argwhere(b)}
    union = pa | pb
    return 1.0 if not union else len(pa & pb) / len(union)


def contour_oracle(pred, gt, tol):
    """Boundary F from the full matrix of pairwise boundary distances."""
    bp, bg = np.argwhere(boundary_pixels(pred)), np.argwhere(boundary_pixels(gt))
    if len(bp) == 0 and len(bg) == 0:
        return 1.0
    if len(bp) == 0 or len(bg) == 0:
        return 0.0
    d = np.sqrt(((bp[:, None, :] - bg[None, :, :]) ** 2).sum(-1))
    close = d <= tol
    p = close.any(axis=1).sum() / len(bp)
    r = close.any(axis=0).sum() / len(bg)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def random_pair(rng, shape=(32, 32)):
    def one():
        kind = rng.integers(0, 3)
        if kind == 0:
            return rng.random(shape) < rng.uniform(0.05, 0.7)
        m = np.zeros(shape, bool)
        for _ in range(rng.integers(0 if kind == 2 else 1, 5)):
            r, c = rng.integers(0, 32, 2)
            h, w = rng.integers(1, 16, 2)
            m[r:r + h, c:c + w] = True
        return m
    return one(), one()


def criterion_metrics():
    rng = np.random.default_rng(SEED)
    j_ok = f_ok = True
    for _ in range(100):
        a, b = random_pair(rng)
        tol = int(rng.integers(0, 4))
        j_ok &= region_similarity(a, b) == iou_oracle(a, b)
        f_ok &= contour_accuracy(a, b, tol) == contour_oracle(a, b, tol)
    decay = sequence_stats([1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]).decay
    return [
        ("J equals the pixel-set oracle on 100 pairs", j_ok),
        ("F equals the all-pairs distance oracle on 100 pairs", f_ok),
        (f"linear 8-frame decay {decay!r} == 0.60 +- 1e-12", abs(decay - 0.6) <= 1e-12),
    ]


# -- 4 ------------------------------------------------------------------------

def disjoint_blobs(rng, shape, n):
    taken = np.zeros(shape, bool)
    blobs = []
    while len(blobs) < n:
        h, w = rng.integers(2, 11, 2)
        r, c = rng.integers(0, shape[0] - h + 1), rng.integers(0, shape[1] - w + 1)
        if taken[max(r - 1, 0):r + h + 1, max(c - 1, 0):c + w + 1].any():
            continue
        m = np.zeros(shape, bool)
        m[r:r + h, c:c + w] = True
        taken |= m
        blobs.append(m)
    return blobs


def exhaustive_subsets(gt, masks):
    best, winners = -1.0, []
    for k in range(1, len(masks) + 1):
        for subset in itertools.combinations(range(len(masks)), k):
            iou = region_similarity(np.logical_or.reduce([masks[i] for i in subset]), gt)
            if iou > best:
                best, winners = iou, [subset]
            elif iou == best:
                winners.append(subset)
    return best, winners


def criterion_selection():
    rng = np.random.default_rng(SEED)
    shape = (64, 64)
    exact = oracle_agrees = True
    for _ in range(200):
        n = int(rng.integers(1, 9))
        blobs = disjoint_blobs(rng, shape, n)
        k = int(rng.integers(1, n + 1))
        subset = sorted(rng.choice(n, k, replace=False).tolist())
        gt = np.logical_or.reduce([blobs[i] for i in subset])
        props = [InstanceProposal(m, f"c{i % 3}", float(rng.random())) for i, m in enumerate(blobs)]
        chosen, _ = select_indices(gt, props)
        exact &= sorted(chosen) == subset
        best, winners = exhaustive_subsets(gt, blobs)
        oracle_agrees &= best == 1.0 and winners == [tuple(sorted(chosen))]
    return [
        ("greedy returns exactly the generating subset (200 constructions)", exact),
        ("exhaustive search has the same unique optimum", oracle_agrees),
    ]


# -- 5 ------------------------------------------------------------------------

FULL = PipelineConfig(sigma=2.0)


def criterion_independence():
    frames, gts, props, contours = distractor_sequence(with_contours=True)
    ref = run_sequence(frames, gts[0], props, contours, FULL, jobs=1)

    def same(res, mapping=None):
        mapping = mapping or {t: t for t in range(1, len(frames))}
        return all(
            np.array_equal(res.masks[k - 1], ref.masks[t - 1])
            and np.array_equal(res.probabilities[k - 1], ref.probabilities[t - 1])
            for k, t in mapping.items()
        )

    checks = []
    for jobs in (2, 8):
        checks.append((f"jobs={jobs} bit-identical to jobs=1", same(run_sequence(frames, gts[0], props, contours, FULL, jobs=jobs))))
    rng = np.random.default_rng(SEED)
    perm_ok = True
    for _ in range(3):
        order = (rng.permutation(len(frames) - 1) + 1).tolist()
        perm_ok &= same(run_sequence(frames, gts[0], props, contours, FULL, order=order))
    checks.append(("random processing orders bit-identical", perm_ok))
    keep = [t for t in range(len(frames)) if t != 5]
    sub = run_sequence(
        [frames[t] for t in keep], gts[0], [props[t] for t in keep], [contours[t] for t in keep], FULL
    )
    checks.append(("deleting frame 5 leaves every other frame unchanged",
                   same(sub, {k: t for k, t in enumerate(keep) if t})))
    return checks


# -- 6 ------------------------------------------------------------------------

def criterion_semantic_benefit():
    frames, gts, props, contours = distractor_sequence(with_contours=True)
    full = run_sequence(frames, gts[0], props, contours, FULL)
    no_snap = run_sequence(frames, gts[0], props, None, PipelineConfig(sigma=2.0, snapping=False))
    base = appearance_baseline(frames, gts[0], FULL)

    def mean_j(masks):
        return float(np.mean([region_similarity(m, g) for m, g in zip(masks, gts[1:])]))

    j_base, j_cond, j_full = mean_j(base), mean_j(no_snap.masks), mean_j(full.masks)
    j_return = region_similarity(full.masks[RETURN_FRAME - 1], gts[RETURN_FRAME])
    return [
        (f"conditional mean J {j_cond:.3f} - appearance-only {j_base:.3f} >= 0.1", j_cond - j_base >= 0.1),
        (f"full pipeline mean J {j_full:.3f} - appearance-only {j_base:.3f} >= 0.1", j_full - j_base >= 0.1),
        (f"return frame J {j_return:.3f} >= 0.8", j_return >= 0.8),
    ]


# -- 7 ------------------------------------------------------------------------

def criterion_snapping():
    rng = np.random.default_rng(SEED)
    idem = bounds = True
    for _ in range(200):
        shape = tuple(rng.integers(4, 40, 2))
        c = rng.random(shape) * 0.15
        for _ in range(rng.integers(0, 5)):
            c[rng.integers(0, shape[0]), :] = rng.uniform(0.5, 1.0)
            c[:, rng.integers(0, shape[1])] = rng.uniform(0.5, 1.0)
        sp = superpixels_from_contours(c, 0.3)
        m = rng.random(shape) < rng.random()
        once = snap_to_superpixels(m, sp, 0.5)
        idem &= np.array_equal(snap_to_superpixels(once, sp, 0.5), once)
        snapped = rng.random(shape) < 0.2
        out = recover_thin_structures(snapped, m, c, 0.3, int(rng.integers(0, 3)), float(rng.uniform(0.05, 1.0)))
        bounds &= bool(np.all(out >= snapped) and np.all(out <= (snapped | m)))

    shape = (16, 16)
    line = np.zeros(shape, bool)
    line[3:13, 7] = True
    c = np.zeros(shape)
    c[3:13, 8] = 1.0
    body = np.zeros(shape, bool)
    body[0:2, 0:2] = True
    recovered = recover_thin_structures(body, body | line, c, tau=0.5, dist=1, rho=0.9)
    return [
        ("snap_to_superpixels idempotent (200 instances)", idem),
        ("snapped <= recovered <= snapped | original (200 instances)", bounds),
        ("thin-line fixture recovered exactly", np.array_equal(recovered, body | line)),
    ]


# -- 8 ------------------------------------------------------------------------

def criterion_formats():
    rng = np.random.default_rng(SEED)
    with tempfile.TemporaryDirectory() as tmp:
        mask_ok = gray_ok = True
        for i in range(20):
            m = rng.random((64, 64)) < 0.5
            p = os.path.join(tmp, f"m{i}.pgm")
            write_mask(p, m)
            mask_ok &= np.array_equal(read_mask(p), m)
            g = rng.integers(0, 256, (17, 23)) / 255.0
            q = os.path.join(tmp, f"g{i}.pgm")
            write_graymap(q, g)
            before = open(q, "rb").read()
            gray_ok &= np.array_equal(read_graymap(q), g)
            write_graymap(q, read_graymap(q))
            gray_ok &= open(q, "rb").read() == before and read_pgm(q).dtype == np.uint8

        frames, gts, props, contours = distractor_sequence(with_contours=True)
        manifest = write_sequence(os.path.join(tmp, "seq"), frames, gts, props, contours)
        outs = {}
        for jobs in (1, 8):
            out = os.path.join(tmp, f"out{jobs}")
            code = cli_main(["run", "--sequence", manifest, "--out", out, "--jobs", str(jobs)])
            names = sorted(n for n in os.listdir(out) if n.endswith(".pgm"))
            outs[jobs] = (code, {n: open(os.path.join(out, n), "rb").read() for n in names})
        cli_ok = outs[1][0] == outs[8][0] == 0 and len(outs[1][1]) == 9 and outs[1][1] == outs[8][1]
    return [
        ("mask read/write round trip bit-exact", mask_ok),
        ("graymap read/write round trip bit-exact", gray_ok),
        ("run --jobs 1 and --jobs 8 mask files byte-identical", cli_ok),
    ]


CRITERIA = [
    (1, "gradient fidelity", criterion_gradients),
    (2, "fusion algebra", criterion_fusion),
    (3, "metric oracle equivalence", criterion_metrics),
    (4, "selection correctness", criterion_selection),
    (5, "frame independence", criterion_independence),
    (6, "semantic-prior benefit", criterion_semantic_benefit),
    (7, "snapping invariants", criterion_snapping),
    (8, "format round trips", criterion_formats),
]


def _check(number, capsys):
    _, title, fn = CRITERIA[number - 1]
    checks = fn()
    assert report(number, title, checks, capsys), [name for name, ok in checks if not ok]


def test_acceptance_1_gradient_fidelity(capsys):
    _check(1, capsys)


def test_acceptance_2_fusion_algebra(capsys):
    _check(2, capsys)


def test_acceptance_3_metric_oracles(capsys):
    _check(3, capsys)


def test_acceptance_4_selection_correctness(capsys):
    _check(4, capsys)


def test_acceptance_5_frame_independence(capsys):
    _check(5, capsys)


def test_acceptance_6_semantic_prior_benefit(capsys):
    _check(6, capsys)


def test_acceptance_7_snapping_invariants(capsys):
    _check(7, capsys)


def test_acceptance_8_format_round_trips(capsys):
    _check(8, capsys)


if __name__ == "__main__":
    results = [report(n, title, fn()) for n, title, fn in CRITERIA]
    sys.exit(0 if all(results) else 1)
