"""Detection and localization scoring on deci-second event streams."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scene, scene_to_frame_events
from oracles import naive_evaluate
from biseld.errors import BiseldError
from biseld.metrics import (FrameEvents, SegmentCounts, angular_error,
                            class_matched_pairs, composite_errors,
                            concat_frame_events, direction_vector, error_rate,
                            evaluate, f_score, localization_error,
                            localization_recall, read_label_csv,
                            segment_counts)

ANGLES = st.floats(min_value=-180.0, max_value=180.0,
                   allow_nan=False, allow_infinity=False)
ELEVATIONS = st.floats(min_value=-90.0, max_value=90.0,
                       allow_nan=False, allow_infinity=False)


def stream(*events: tuple) -> FrameEvents:
    fe = FrameEvents()
    for frame, cls, az, el in events:
        fe.add(frame, cls, direction_vector(az, el))
    return fe


# --- geometry -------------------------------------------------------------

def test_direction_vector_axes():
    np.testing.assert_allclose(direction_vector(90.0, 0.0), [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(direction_vector(0.0, 0.0), [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(direction_vector(0.0, 90.0), [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(direction_vector(-90.0, 0.0), [-1, 0, 0],
                               atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(ANGLES, ELEVATIONS)
def test_direction_vectors_are_unit_length(az, el):
    assert np.linalg.norm(direction_vector(az, el)) == pytest.approx(1.0,
                                                                     abs=1e-12)


def test_angular_error_boundaries_are_exact():
    u = direction_vector(37.0, 12.0)
    assert angular_error(u, u) == 0.0
    assert angular_error(u, -u) == 180.0


def test_angular_error_known_separations():
    assert angular_error(direction_vector(0, 0),
                         direction_vector(60, 0)) == pytest.approx(60.0, abs=1e-9)
    assert angular_error(direction_vector(0, 0),
                         direction_vector(0, 90)) == pytest.approx(90.0, abs=1e-9)


def test_angular_error_normalizes_inputs():
    u = direction_vector(20.0, 10.0)
    v = direction_vector(-40.0, 30.0)
    assert angular_error(3.0 * u, 0.25 * v) == pytest.approx(
        angular_error(u, v), abs=1e-9)
    with pytest.raises(BiseldError, match="zero-length"):
        angular_error([0.0, 0.0, 0.0], u)


@settings(max_examples=60, deadline=None)
@given(ANGLES, ELEVATIONS, ANGLES, ELEVATIONS)
def test_angular_error_is_symmetric(az1, el1, az2, el2):
    u, v = direction_vector(az1, el1), direction_vector(az2, el2)
    assert angular_error(u, v) == pytest.approx(angular_error(v, u), abs=1e-9)
    assert 0.0 <= angular_error(u, v) <= 180.0


# --- event streams --------------------------------------------------------

def test_frame_events_track_extent_and_classes():
    fe = stream((0, 1, 0.0, 0.0), (7, 3, 90.0, 0.0))
    assert fe.n_frames == 8
    assert fe.classes() == {1, 3}
    assert fe.at(5) == []
    with pytest.raises(BiseldError, match="negative frame"):
        fe.add(-1, 0, direction_vector(0.0, 0.0))


def test_read_label_csv_reports_bad_rows(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("0,1,90,0\n1,2,45\n")
    with pytest.raises(BiseldError, match=":2"):
        read_label_csv(path)
    path.write_text("0,one,90,0\n")
    with pytest.raises(BiseldError, match="malformed number"):
        read_label_csv(path)
    with pytest.raises(BiseldError, match="no such file"):
        read_label_csv(tmp_path / "absent.csv")


def test_concat_aligns_streams_to_segment_boundaries():
    first = stream((11, 0, 0.0, 0.0))   # 12 frames -> two segments
    second = stream((0, 1, 90.0, 0.0))
    joined = concat_frame_events([first, second])
    assert sorted(joined.events) == [11, 20]
    assert joined.at(20)[0][0] == 1
    assert joined.n_frames == 30  # second stream still occupies a full segment


def test_concat_reserves_a_segment_for_empty_streams():
    joined = concat_frame_events([FrameEvents(), stream((0, 0, 0.0, 0.0))])
    assert sorted(joined.events) == [10]
    assert joined.n_frames == 20


# --- segment scoring ------------------------------------------------------

def test_segment_counts_true_positive_inside_gate():
    ref = stream((0, 0, 0.0, 0.0))
    pred = stream((3, 0, 15.0, 0.0))  # same segment, 15 degrees off
    counts = segment_counts(ref, pred)
    assert counts == [SegmentCounts(tp=1, fp=0, fn=0, n=1)]


def test_segment_counts_far_match_costs_both_ways():
    ref = stream((0, 0, 0.0, 0.0))
    pred = stream((0, 0, 25.0, 0.0))
    assert segment_counts(ref, pred) == [SegmentCounts(tp=0, fp=1, fn=1, n=1)]


def test_segment_counts_gate_is_strict():
    ref = stream((0, 0, 0.0, 0.0))
    at_gate = stream((0, 0, 20.0, 0.0))
    inside = stream((0, 0, 19.5, 0.0))
    assert segment_counts(ref, at_gate)[0].tp == 0
    assert segment_counts(ref, inside)[0].tp == 1


def test_segment_counts_unmatched_classes():
    ref = stream((0, 0, 0.0, 0.0), (12, 1, 0.0, 0.0))
    pred = stream((0, 2, 0.0, 0.0))
    counts = segment_counts(ref, pred)
    assert counts[0] == SegmentCounts(tp=0, fp=1, fn=1, n=1)  # 0 missed, 2 extra
    assert counts[1] == SegmentCounts(tp=0, fp=0, fn=1, n=1)  # 1 missed


def test_segment_counts_pool_over_the_whole_segment():
    # the best ref/pred pair across the segment decides, not per-frame overlap
    ref = stream((0, 0, 0.0, 0.0))
    pred = stream((9, 0, 10.0, 0.0))
    assert segment_counts(ref, pred)[0].tp == 1


def test_segment_counts_class_filter():
    ref = stream((0, 0, 0.0, 0.0), (0, 1, 90.0, 0.0))
    pred = stream((0, 1, 90.0, 0.0))
    only_one = segment_counts(ref, pred, class_filter=1)
    assert only_one == [SegmentCounts(tp=1, fp=0, fn=0, n=1)]
    only_zero = segment_counts(ref, pred, class_filter=0)
    assert only_zero == [SegmentCounts(tp=0, fp=0, fn=1, n=1)]


def test_f_score_and_error_rate_hand_case():
    counts = [SegmentCounts(tp=2, fp=1, fn=1, n=3)]
    assert f_score(counts) == pytest.approx(2.0 * 2 / (4 + 1 + 1), abs=1e-12)
    assert error_rate(counts) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_error_rate_splits_substitutions_deletions_insertions():
    assert error_rate([SegmentCounts(0, 2, 1, 3)]) == pytest.approx(2.0 / 3.0)
    assert error_rate([SegmentCounts(0, 1, 3, 4)]) == pytest.approx(3.0 / 4.0)


def test_empty_scores():
    assert f_score([]) == 1.0
    assert f_score([SegmentCounts(0, 0, 0, 0)]) == 1.0
    with pytest.raises(BiseldError, match="no active events"):
        error_rate([SegmentCounts(0, 1, 0, 0)])


# --- localization scoring -------------------------------------------------

def test_matched_pairs_greedy_assignment():
    ref = stream((0, 0, 0.0, 0.0), (0, 0, 50.0, 0.0))
    pred = stream((0, 0, 10.0, 0.0), (0, 0, 40.0, 0.0))
    pairs = class_matched_pairs(ref, pred)
    assert sorted(pairs) == pytest.approx([10.0, 10.0], abs=1e-9)


def test_matched_pairs_leftovers_are_dropped():
    ref = stream((0, 0, 0.0, 0.0))
    pred = stream((0, 0, 10.0, 0.0), (0, 0, 120.0, 0.0))
    assert class_matched_pairs(ref, pred) == pytest.approx([10.0], abs=1e-9)


def test_matched_pairs_never_cross_classes():
    ref = stream((0, 0, 0.0, 0.0))
    pred = stream((0, 1, 0.0, 0.0))
    assert class_matched_pairs(ref, pred) == []


def test_localization_error_flags_empty_matches():
    assert localization_error([]) == (180.0, True)
    le, unmatched = localization_error([10.0, 20.0])
    assert (le, unmatched) == (15.0, False)


def test_localization_recall_needs_matching_instance_counts():
    ref = stream((0, 0, 0.0, 0.0), (1, 0, 0.0, 0.0), (2, 0, 0.0, 0.0))
    pred = stream((0, 0, 170.0, 0.0),               # direction does not matter
                  (1, 0, 0.0, 0.0), (1, 0, 10.0, 0.0))  # doubled instance
    assert localization_recall(ref, pred) == pytest.approx(1.0 / 3.0)
    assert localization_recall(FrameEvents(), pred) == 1.0


def test_composite_errors_worked_case():
    sed, doa, seld = composite_errors(0.2, 0.8, 18.0, 0.9)
    assert sed == pytest.approx(0.2, abs=1e-12)
    assert doa == pytest.approx(0.1, abs=1e-12)
    assert seld == pytest.approx(0.15, abs=1e-12)


# --- full evaluation ------------------------------------------------------

def test_evaluate_hand_scene():
    ref = stream(*[(f, 0, 0.0, 0.0) for f in range(10)],
                 *[(f, 1, 90.0, 0.0) for f in range(5)])
    pred = stream(*[(f, 0, 10.0, 0.0) for f in range(10)])
    report = evaluate(ref, pred)

    assert report.er20 == pytest.approx(0.5)     # one deletion over N=2
    assert report.f20 == pytest.approx(2.0 / 3.0)
    assert report.le_cd == pytest.approx(10.0, abs=1e-9)
    assert report.lr_cd == pytest.approx(10.0 / 15.0)
    assert not report.le_unmatched
    sed, doa, seld = composite_errors(report.er20, report.f20,
                                      report.le_cd, report.lr_cd)
    assert report.sed_error == pytest.approx(sed, abs=1e-12)
    assert report.doa_error == pytest.approx(doa, abs=1e-12)
    assert report.seld_error == pytest.approx(seld, abs=1e-12)

    assert report.per_class[0]["f20"] == 1.0
    assert report.per_class[0]["le_cd"] == pytest.approx(10.0, abs=1e-9)
    assert report.per_class[1]["f20"] == 0.0
    assert report.per_class[1]["le_cd"] is None
    assert report.per_class[1]["lr_cd"] == 0.0


def test_evaluate_report_serializes_to_json():
    ref = stream((0, 0, 0.0, 0.0))
    report = evaluate(ref, ref)
    doc = json.loads(json.dumps(report.to_dict()))
    assert doc["seld_error"] == 0.0
    assert doc["er20"] == 0.0 and doc["f20"] == 1.0
    assert doc["le_cd"] == 0.0 and doc["lr_cd"] == 1.0
    assert set(doc["per_class"]) == {"0"}


def test_evaluate_perfect_and_antipodal_extremes():
    ref = stream(*[(f, 0, 45.0, 30.0) for f in range(10)])
    perfect = evaluate(ref, ref)
    assert perfect.seld_error == 0.0
    flipped = FrameEvents()
    for frame in range(10):
        flipped.add(frame, 0, -direction_vector(45.0, 30.0))
    report = evaluate(ref, flipped)
    assert report.le_cd == 180.0  # exactly antipodal, no rounding slack


def test_evaluate_agrees_with_naive_loops(rng):
    checked = 0
    while checked < 12:
        ref_ev, pred_ev, n_frames = random_scene(rng)
        if not ref_ev:
            continue
        checked += 1
        ref = scene_to_frame_events(ref_ev, n_frames)
        pred = scene_to_frame_events(pred_ev, n_frames)
        report = evaluate(ref, pred)
        want = naive_evaluate(ref_ev, pred_ev, n_frames)
        assert abs(report.er20 - want["er"]) <= 1e-12
        assert abs(report.f20 - want["f"]) <= 1e-12
        assert abs(report.le_cd - want["le"]) <= 1e-12
        assert report.le_unmatched == want["le_unmatched"]
        assert abs(report.lr_cd - want["lr"]) <= 1e-12
        assert abs(report.sed_error - want["sed"]) <= 1e-12
        assert abs(report.doa_error - want["doa"]) <= 1e-12
        assert abs(report.seld_error - want["seld"]) <= 1e-12
