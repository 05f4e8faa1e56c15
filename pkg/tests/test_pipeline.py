import logging

import numpy as np
import pytest

from semvos.appearance import extract_features, predict

from semvos.metrics import region_similarity
from semvos.pipeline import (
    PipelineConfig,
    PipelineError,
    appearance_baseline,
    flatten_objects,
    run_multiobject,
    run_sequence,
)
from semvos.semantics import InstanceProposal

from synthetic import OCCLUDED_FRAME, RETURN_FRAME, distractor_sequence, static_sequence

CFG = PipelineConfig(sigma=2.0, snapping=False)


@pytest.fixture(scope="module")
def seq():
    return distractor_sequence(with_contours=True)


@pytest.fixture(scope="module")
def baseline_run(seq):
    frames, gts, props, _ = seq
    return run_sequence(frames, gts[0], props, None, CFG)


def test_single_frame_sequence(seq):
    frames, gts, props, _ = seq
    res = run_sequence(frames[:1], gts[0], props[:1], None, CFG)
    assert res.masks == [] and res.model.as_dict() == {"person": 1}


def test_static_sequence_is_exact():
    frames, gts, props = static_sequence()
    res = run_sequence(frames, gts[0], props, None, PipelineConfig())
    assert all(np.array_equal(m, gts[0]) for m in res.masks)
    assert all(region_similarity(m, gts[0]) == 1.0 for m in res.masks)


def test_distractor_and_occlusion(seq, baseline_run):
    frames, gts, _, _ = seq
    res = baseline_run
    assert res.model.as_dict() == {"person": 1}
    assert res.provenance[OCCLUDED_FRAME - 1] == []
    assert not res.masks[OCCLUDED_FRAME - 1].any()
    assert region_similarity(res.masks[RETURN_FRAME - 1], gts[RETURN_FRAME]) >= 0.8
    ours = np.mean([region_similarity(m, g) for m, g in zip(res.masks, gts[1:])])
    base = np.mean([region_similarity(m, g) for m, g in zip(appearance_baseline(frames, gts[0], CFG), gts[1:])])
    assert ours - base >= 0.1


def test_order_and_jobs_independent(seq, baseline_run):
    frames, gts, props, _ = seq
    ref = baseline_run
    other = run_sequence(frames, gts[0], props, None, CFG, jobs=2, order=list(range(len(frames) - 1, 0, -1)))
    for a, b, pa, pb in zip(ref.masks, other.masks, ref.probabilities, other.probabilities):
        assert np.array_equal(a, b) and np.array_equal(pa, pb)
    assert ref.provenance == other.provenance
    with pytest.raises(ValueError):
        run_sequence(frames, gts[0], props, None, CFG, order=[1, 1])


def test_frame_deletion_independent(seq, baseline_run):
    frames, gts, props, _ = seq
    keep = [t for t in range(len(frames)) if t != OCCLUDED_FRAME]
    res = run_sequence([frames[t] for t in keep], gts[0], [props[t] for t in keep], None, CFG)
    for k, t in enumerate(keep[1:]):
        assert np.array_equal(res.probabilities[k], baseline_run.probabilities[t - 1])


def test_snapping_path(seq):
    frames, gts, props, contours = seq
    res = run_sequence(frames[:4], gts[0], props[:4], contours[:4], PipelineConfig(sigma=2.0))
    assert "snapping" in res.timings
    assert all(region_similarity(m, g) > 0.8 for m, g in zip(res.masks, gts[1:4]))


def test_no_proposals_degenerates_to_empty_prior(seq, caplog):
    frames, gts, _, _ = seq
    with caplog.at_level(logging.WARNING):
        res = run_sequence(frames[:3], gts[0], None, None, CFG)
    assert "no proposals" in caplog.text
    assert len(res.model) == 0 and res.provenance == [[], []]
    assert all(m.shape == gts[0].shape for m in res.masks)
    # with an all-zero prior the fused output is the background classifier alone
    bg = res.frozen.conditional.bg
    for t, (m, prob) in enumerate(zip(res.masks, res.probabilities), start=1):
        expected = predict(bg, extract_features(frames[t])).values
        assert np.array_equal(prob, expected)
        assert np.array_equal(m, expected > CFG.threshold)


def test_errors_name_frame_and_stage(seq):
    frames, gts, props, _ = seq
    bad = [frames[0], frames[1][:20, :20]]
    with pytest.raises(PipelineError) as err:
        run_sequence(bad, gts[0], [props[0], props[1]], None, CFG)
    assert err.value.frame == 1 and err.value.stage == "propagation"
    with pytest.raises(PipelineError) as err:
        run_sequence(frames[:2], gts[0][:10], props[:2], None, CFG)
    assert err.value.frame == 0


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(balance="other")
    with pytest.raises(ValueError):
        PipelineConfig(threshold=1.0)
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({"lr": 1})


def test_flatten_objects():
    m1 = np.array([[1, 1, 0, 0]], bool)
    m2 = np.array([[0, 1, 1, 0]], bool)
    p1 = np.array([[0.9, 0.6, 0.1, 0.0]])
    p2 = np.array([[0.0, 0.9, 0.7, 0.0]])
    assert flatten_objects([m1, m2], [p1, p2]).tolist() == [[1, 2, 2, 0]]
    p2[0, 1] = 0.6
    assert flatten_objects([m1, m2], [p1, p2]).tolist() == [[1, 1, 2, 0]]  # tie: lower id


def test_multiobject(seq):
    frames, gts, props, _ = seq
    distractor0 = props[0][0].mask
    res = run_multiobject(frames[:3], [gts[0], distractor0], props[:3], None, CFG)
    assert len(res.objects) == 2 and len(res.labels) == 2
    assert res.objects[1].model.as_dict() == {"dog": 1}
    lab = res.labels[0]
    assert set(np.unique(lab)) <= {0, 1, 2}
    assert np.array_equal(lab == 1, res.objects[0].masks[0] & ~((lab == 2)))
    with pytest.raises(ValueError):
        run_multiobject(frames[:2], [], props[:2], None, CFG)
