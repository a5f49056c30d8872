import numpy as np
import pytest

from sspatch.detector import (
    Detection,
    DetectorConfig,
    ToyDetector,
    ToyDetectorParams,
    fill_score,
    object_score,
    person_band,
    sort_detections,
    toy_detect,
)
from sspatch.geometry import BoundingBox

PARAMS = ToyDetectorParams()


def canvas(h=160, w=120, bg=0.1):
    return np.full((h, w), bg)


def paint(img, box, value):
    img[int(box.y) : int(box.y2), int(box.x) : int(box.x2)] = value
    return img


# --- band ------------------------------------------------------------------------


def test_band_bounds():
    img = np.array([[0.1, 0.49, 0.5, 0.8, 0.89, 0.9, 1.0]])
    assert person_band(img, PARAMS).tolist() == [[False, False, True, True, True, False, False]]


# --- component gates ---------------------------------------------------------------


def test_solid_rectangle_scores_one():
    box = BoundingBox(40, 30, 30, 100)
    dets = toy_detect(paint(canvas(), box, 0.8))
    assert len(dets) == 1
    assert dets[0].box == box
    assert dets[0].class_name == "person"
    assert dets[0].score == 1.0


def test_blank_image_yields_nothing():
    assert toy_detect(canvas()) == []


def test_hot_rectangle_is_out_of_band():
    box = BoundingBox(40, 30, 30, 100)
    assert toy_detect(paint(canvas(), box, 0.95)) == []


def test_bisected_body_drops_below_min_area():
    # 30x36 solid = 1080 px; a 10-row cold bar leaves two 30x13 = 390 px halves,
    # both under the 400 px area gate -> nothing survives
    box = BoundingBox(20, 10, 30, 36)
    img = paint(canvas(60, 80), box, 0.8)
    clean = toy_detect(img)
    assert len(clean) == 1 and clean[0].score == 1.0
    img[23:33, 20:50] = 0.2
    assert toy_detect(img) == []


def test_hot_bar_carves_like_a_cold_one():
    box = BoundingBox(20, 10, 30, 36)
    img = paint(canvas(60, 80), box, 0.8)
    img[23:33, 20:50] = 0.95
    assert toy_detect(img) == []


def test_two_disjoint_bodies_two_detections():
    img = canvas()
    a, b = BoundingBox(10, 20, 30, 100), BoundingBox(70, 20, 30, 100)
    paint(paint(img, a, 0.8), b, 0.7)
    dets = toy_detect(img)
    assert len(dets) == 2
    assert {d.box for d in dets} == {a, b}


def test_low_fill_connected_component_suppressed():
    # H-shape: bbox 40x60 but only 1104 warm px -> fill 0.46 < floor -> score 0
    img = canvas(80, 60)
    img[10:70, 10:18] = 0.8
    img[10:70, 42:50] = 0.8
    img[38:44, 18:42] = 0.8
    dets = toy_detect(img)
    assert len(dets) == 1
    assert dets[0].box == BoundingBox(10, 10, 40, 60)
    assert dets[0].score == 0.0
    assert all(d.score < 0.25 for d in dets)


def test_area_gate_boundary():
    # 15 px wide: 26 rows = 390 px rejected, 27 rows = 405 px accepted
    small = paint(canvas(60, 40), BoundingBox(5, 5, 15, 26), 0.8)
    assert toy_detect(small) == []
    big = paint(canvas(60, 40), BoundingBox(5, 5, 15, 27), 0.8)
    assert len(toy_detect(big)) == 1


def test_aspect_gates():
    square = paint(canvas(80, 80), BoundingBox(10, 10, 30, 30), 0.8)  # aspect 1.0
    assert toy_detect(square) == []
    pole = paint(canvas(100, 40), BoundingBox(10, 5, 8, 80), 0.8)  # aspect 10.0
    assert toy_detect(pole) == []


def test_detection_order_and_determinism():
    img = canvas()
    a, b = BoundingBox(10, 20, 30, 100), BoundingBox(70, 20, 30, 100)
    paint(img, a, 0.8)
    # carve b a little so it scores lower but stays above the floor
    paint(img, b, 0.8)
    img[30:40, 75:95] = 0.1
    first = toy_detect(img)
    assert [d.box.x for d in first] == [10, 70]
    assert first[0].score > first[1].score > 0.0
    assert toy_detect(img) == first


def test_equal_scores_tie_break_by_x():
    img = canvas()
    paint(img, BoundingBox(70, 20, 30, 100), 0.8)
    paint(img, BoundingBox(10, 20, 30, 100), 0.8)
    dets = toy_detect(img)
    assert [d.box.x for d in dets] == [10, 70]


# --- fill scoring ------------------------------------------------------------------


def test_fill_score_endpoints():
    assert fill_score(1.0, PARAMS) == 1.0
    assert fill_score(PARAMS.fill_floor, PARAMS) == 0.0
    assert fill_score(0.3, PARAMS) == 0.0


def test_fill_score_midpoint_is_sharpened():
    mid = (PARAMS.fill_floor + 1.0) / 2.0
    assert fill_score(mid, PARAMS) == pytest.approx(0.5 ** PARAMS.fill_sharpness)


def test_fill_score_monotone():
    xs = np.linspace(0.0, 1.0, 101)
    ys = [fill_score(x, PARAMS) for x in xs]
    assert all(b >= a for a, b in zip(ys, ys[1:]))


# --- per-person score ----------------------------------------------------------------


def test_object_score_picks_best_overlapping():
    gt = BoundingBox(10, 10, 30, 100)
    dets = [
        Detection(BoundingBox(10, 10, 30, 100), "person", 0.4),
        Detection(BoundingBox(12, 12, 30, 100), "person", 0.9),
        Detection(BoundingBox(200, 10, 30, 100), "person", 1.0),  # elsewhere
        Detection(BoundingBox(10, 10, 30, 100), "dog", 1.0),  # wrong class
    ]
    assert object_score(dets, gt) == 0.9


def test_object_score_no_match_is_zero():
    gt = BoundingBox(10, 10, 30, 100)
    assert object_score([], gt) == 0.0
    far = [Detection(BoundingBox(300, 300, 30, 100), "person", 1.0)]
    assert object_score(far, gt) == 0.0


def test_sort_detections_canonical_order():
    d1 = Detection(BoundingBox(5, 5, 10, 20), "person", 0.5)
    d2 = Detection(BoundingBox(1, 5, 10, 20), "person", 0.5)
    d3 = Detection(BoundingBox(9, 5, 10, 20), "person", 0.9)
    assert sort_detections([d1, d2, d3]) == [d3, d2, d1]


def test_detection_dict_round_trip():
    d = Detection(BoundingBox(1, 2, 3, 4), "person", 0.5)
    assert Detection.from_dict(d.to_dict()) == d


# --- config ---------------------------------------------------------------------------


def test_config_creates_toy():
    det = DetectorConfig().create()
    assert isinstance(det, ToyDetector)
    assert det.name == "toy"


def test_config_rejects_bad_kinds():
    with pytest.raises(ValueError):
        DetectorConfig(kind="external").create()  # no command
    with pytest.raises(ValueError):
        DetectorConfig(kind="banana").create()
