import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adobing.adaptation import (
    AdaptationError,
    AnnotatedFrame,
    SampleSpec,
    adapt_objectness,
    adapt_objectness_detailed,
    enumerate_windows,
    generate_samples,
    label_windows,
)
from adobing.adasvm import AdaSvmConfig, FEATURE_SCALE, fit
from adobing.bing import LinearModel, default_base_model, window_sizes_for
from adobing.imaging import BBox, GrayImage, ImageError, extract_ng_feature, iou, normed_gradient
from adobing.synthetic import textured_target_frame


def frame_fixture(seed=0):
    img, box = textured_target_frame(seed)
    return AnnotatedFrame(img, box)


def test_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(stride=0, window_sizes=((4, 4),))
    with pytest.raises(ValueError):
        SampleSpec(stride=1, window_sizes=((4, 4),), pos_iou=0.3, neg_iou=0.5)
    with pytest.raises(ValueError):
        SampleSpec(stride=1, window_sizes=())


def test_spec_defaults_from_target():
    spec = SampleSpec.for_target(BBox(0, 0, 24, 17), 100, 80)
    assert spec.stride == 3  # ceil(17 / 8)
    assert (spec.pos_iou, spec.neg_iou, spec.max_negatives) == (0.5, 0.3, 500)
    assert spec.window_sizes == tuple(window_sizes_for(24, 17, max_w=100, max_h=80))


def test_target_must_be_inside():
    with pytest.raises(ImageError):
        AnnotatedFrame(GrayImage(np.zeros((10, 10), np.uint8)), BBox(5, 5, 6, 6))


def test_enumeration_100x100():
    assert len(enumerate_windows(100, 100, [(20, 20)], 10)) == 81


def test_gt_window_positive_and_disjoint_negative():
    fr = AnnotatedFrame(GrayImage(np.random.default_rng(0).integers(0, 256, (100, 100)).astype(np.uint8)),
                        BBox(40, 40, 20, 20))
    lw = label_windows(fr, SampleSpec(stride=10, window_sizes=((20, 20),), max_negatives=1000))
    rows = {tuple(b): lab for b, lab in zip(lw.boxes.tolist(), lw.labels)}
    assert rows[(40, 40, 20, 20)] == 1
    assert rows[(0, 0, 20, 20)] == -1
    assert tuple(lw.boxes[0]) == (40, 40, 20, 20)
    assert len(lw.boxes) <= 81


def test_gt_always_included_even_off_grid():
    fr = AnnotatedFrame(GrayImage(np.zeros((60, 60), np.uint8)), BBox(13, 7, 20, 20))
    lw = label_windows(fr, SampleSpec(stride=5, window_sizes=((20, 20),)))
    assert tuple(lw.boxes[0]) == (13, 7, 20, 20) and lw.labels[0] == 1


def test_zero_positives_is_an_error():
    fr = AnnotatedFrame(GrayImage(np.zeros((60, 60), np.uint8)), BBox(10, 10, 4, 4))
    with pytest.raises(AdaptationError, match="stride"):
        label_windows(fr, SampleSpec(stride=5, window_sizes=((30, 30),)))


def test_labels_match_brute_force_and_features():
    fr = frame_fixture(1)
    spec = SampleSpec.for_target(fr.target, fr.image.width, fr.image.height, max_negatives=60)
    lw = label_windows(fr, spec)
    ngmap = normed_gradient(fr.image)
    for k, (b, lab) in enumerate(zip(lw.boxes.tolist(), lw.labels)):
        v = iou(BBox(*b), fr.target)
        assert not (spec.neg_iou < v < spec.pos_iou)
        assert lab == (1 if v >= spec.pos_iou else -1)
        if k % 9 == 0:
            assert np.array_equal(lw.features[k], extract_ng_feature(ngmap, BBox(*b)).g)
    assert (lw.labels < 0).sum() == 60
    ts = generate_samples(fr, spec)
    assert np.array_equal(ts.X, lw.features * FEATURE_SCALE)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000))
def test_sampling_is_seeded(frame_seed, seed):
    fr = frame_fixture(frame_seed % 7)
    spec = SampleSpec.for_target(fr.target, fr.image.width, fr.image.height, max_negatives=40, seed=seed)
    a, b = label_windows(fr, spec), label_windows(fr, spec)
    assert np.array_equal(a.boxes, b.boxes) and np.array_equal(a.labels, b.labels)


def test_zero_C_is_identity():
    base = default_base_model()
    assert adapt_objectness(base, frame_fixture(), cfg=AdaSvmConfig(C=0.0)) == base


def test_two_sample_fit_from_zero():
    # one positive, one negative; the fitted direction separates them
    rng = np.random.default_rng(0)
    xp, xn = rng.random(64), rng.random(64)
    from adobing.adasvm import TrainingSet
    w = fit(TrainingSet(np.vstack([xp, xn]), [1, -1]), LinearModel(np.zeros(64)), AdaSvmConfig(C=1.0)).w
    assert np.dot(w, xp - xn) > 0


def _gt_rank(model, lw):
    scores = lw.features.astype(float) @ model.w
    return float(np.mean(scores[0] > scores[lw.labels < 0]))


def test_adaptation_ranks_target_higher():
    base = default_base_model()
    gains = []
    for seed in range(5):
        fr = frame_fixture(seed)
        spec = SampleSpec.for_target(fr.target, fr.image.width, fr.image.height)
        lw = label_windows(fr, spec)
        adapted = adapt_objectness(base, fr, spec, AdaSvmConfig(C=1.0))
        gains.append(_gt_rank(adapted, lw) - _gt_rank(base, lw))
    assert min(gains) >= 0 and max(gains) > 0


def test_multi_frame_adaptation_runs():
    frames = [frame_fixture(s) for s in range(3)]
    res = adapt_objectness_detailed(default_base_model(), frames, cfg=AdaSvmConfig(C=0.1), max_negatives=50)
    assert res.converged
