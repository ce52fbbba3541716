import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adobing.bench import (
    SUCCESS_THRESHOLDS,
    EvaluationRecord,
    SequenceError,
    SuccessCurve,
    auc,
    center_error,
    evaluate,
    load_sequence,
    parse_box_line,
    precision_curve,
    read_boxes,
    record_from,
    success_curve,
    write_boxes,
    write_metrics,
)
from adobing.imaging import BBox, iou, write_pgm


def make_seq(root, n_images, lines, sep=","):
    (root / "img").mkdir(parents=True)
    for i in range(n_images):
        write_pgm(root / "img" / f"{i + 1:04d}.pgm", np.zeros((4, 4), np.uint8))
    (root / "groundtruth_rect.txt").write_text("\n".join(sep.join(map(str, b)) for b in lines) + "\n")
    return root


def shifted(box, dx, dy):
    return BBox(box.x + dx, box.y + dy, box.w, box.h)


# ---- parsing and loading ---------------------------------------------------------------

def test_load_well_formed(tmp_path):
    seq = load_sequence(make_seq(tmp_path / "s", 3, [(1, 2, 3, 4)] * 3))
    assert len(seq) == 3 and seq.ground_truth[0] == BBox(1, 2, 3, 4)
    assert [p.name for p in seq.frames] == ["0001.pgm", "0002.pgm", "0003.pgm"]


def test_load_count_mismatch(tmp_path):
    with pytest.raises(SequenceError, match="3 images but 2"):
        load_sequence(make_seq(tmp_path / "s", 3, [(1, 2, 3, 4)] * 2))


def test_mixed_separators_parse_like_commas(tmp_path):
    (tmp_path / "a.txt").write_text("1,2,3,4\n5\t6\t7\t8\n9, 10,\t11 ,12\n")
    (tmp_path / "b.txt").write_text("1,2,3,4\n5,6,7,8\n9,10,11,12\n")
    assert read_boxes(tmp_path / "a.txt") == read_boxes(tmp_path / "b.txt")


def test_malformed_line_reports_line_number(tmp_path):
    (tmp_path / "g.txt").write_text("1,2,3,4\n1,2,x,4\n")
    with pytest.raises(SequenceError, match=":2:"):
        read_boxes(tmp_path / "g.txt")
    with pytest.raises(SequenceError, match="expected 4"):
        parse_box_line("1,2,3", 7)


def test_empty_gt_file(tmp_path):
    (tmp_path / "g.txt").write_text("")
    with pytest.raises(SequenceError):
        read_boxes(tmp_path / "g.txt")


def test_missing_pieces(tmp_path):
    with pytest.raises(SequenceError):
        load_sequence(tmp_path / "nothing")
    (tmp_path / "s").mkdir()
    with pytest.raises(SequenceError):
        load_sequence(tmp_path / "s")


def test_nan_lines_are_lost_frames(tmp_path):
    boxes = [BBox(1, 2, 3, 4), None, BBox(1.5, 2, 3, 4)]
    write_boxes(tmp_path / "t.txt", boxes)
    assert read_boxes(tmp_path / "t.txt", allow_missing=True) == boxes


# ---- center error ------------------------------------------------------------------------

def test_center_error_examples():
    a = BBox(10, 10, 20, 20)
    assert center_error(a, a) == 0
    assert center_error(shifted(a, 3, 4), a) == 5
    assert center_error(None, a) == math.inf


@given(st.tuples(*[st.integers(0, 100)] * 2, *[st.integers(1, 50)] * 2),
       st.tuples(*[st.integers(0, 100)] * 2, *[st.integers(1, 50)] * 2))
def test_center_error_scalar(a, b):
    ref = math.sqrt((a[0] + a[2] / 2 - b[0] - b[2] / 2) ** 2 + (a[1] + a[3] / 2 - b[1] - b[3] / 2) ** 2)
    assert center_error(BBox(*a), BBox(*b)) == pytest.approx(ref)


# ---- curves ------------------------------------------------------------------------------

def test_perfect_tracking_precision():
    gt = [BBox(i, i, 10, 10) for i in range(5)]
    assert np.all(precision_curve(record_from(gt, gt)).values == 1.0)


def test_precision_at_20_two_thirds():
    g = BBox(0, 0, 10, 10)
    rec = record_from([g, shifted(g, 10, 0), shifted(g, 30, 0)], [g] * 3)
    assert precision_curve(rec).at(20) == pytest.approx(2 / 3)


def test_success_all_zero_overlap():
    rec = record_from([BBox(100, 100, 5, 5)] * 3, [BBox(0, 0, 5, 5)] * 3)
    assert np.all(success_curve(rec).values[1:] == 0)


def test_success_strict_at_one_and_auc_20_over_21():
    gt = [BBox(0, 0, 8, 8)] * 4
    curve = success_curve(record_from(gt, gt))
    assert curve.values.tolist() == [1.0] * 20 + [0.0]
    assert auc(curve) == 20 / 21


def test_auc_extremes_and_grid_check():
    assert auc(SuccessCurve(SUCCESS_THRESHOLDS, np.ones(21))) == 1.0
    assert auc(SuccessCurve(SUCCESS_THRESHOLDS, np.zeros(21))) == 0.0
    with pytest.raises(ValueError):
        auc(SuccessCurve(np.array([0, 0.1, 0.5, 1.0]), np.ones(4)))


def test_empty_record_rejected():
    with pytest.raises(ValueError):
        precision_curve(EvaluationRecord([], []))
    with pytest.raises(ValueError):
        success_curve(EvaluationRecord([], []))


record_strategy = st.lists(
    st.tuples(st.integers(-20, 20), st.integers(-20, 20), st.integers(5, 30), st.integers(5, 30),
              st.booleans()), min_size=1, max_size=25)


@given(record_strategy)
def test_curves_match_counting_oracle(rows):
    g = BBox(50, 50, 20, 20)
    tracked = [None if lost else BBox(g.x + dx, g.y + dy, w, h) for dx, dy, w, h, lost in rows]
    rec = record_from(tracked, [g] * len(rows))
    prec, succ = precision_curve(rec), success_curve(rec)
    for k, tau in enumerate(prec.thresholds):
        count = sum(1 for t in tracked if t is not None and center_error(t, g) <= tau)
        assert prec.values[k] == count / len(rows)
    for k, th in enumerate(succ.thresholds):
        count = sum(1 for t in tracked if t is not None and iou(t, g) > th)
        assert succ.values[k] == count / len(rows)
    assert np.all(np.diff(prec.values) >= 0) and np.all(np.diff(succ.values) <= 0)
    a = auc(succ)
    assert succ.values.min() <= a <= succ.values.max()
    assert succ.values[0] == sum(1 for t in tracked if t is not None and iou(t, g) > 0) / len(rows)


def test_metrics_files(tmp_path):
    gt = [BBox(0, 0, 10, 10)] * 3
    rec = record_from(gt, gt)
    metrics = write_metrics(tmp_path / "out", rec)
    assert metrics == {"precision_at_20": 1.0, "auc": 20 / 21}
    assert json.loads((tmp_path / "out" / "metrics.json").read_text()) == metrics
    lines = (tmp_path / "out" / "success.csv").read_text().splitlines()
    assert lines[0] == "threshold,value" and len(lines) == 22
    assert evaluate(rec)["precision"].values[0] == 1.0
