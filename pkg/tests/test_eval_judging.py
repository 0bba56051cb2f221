import json
import math
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from guirl.evalpipe import (
    ActionRecord,
    BBox,
    BenchmarkSample,
    Dataset,
    JudgeResult,
    MissingJudgeResult,
    ModelProfile,
    ParseFailure,
    Point,
    Polygon,
    Prediction,
    Refusal,
    compute_metrics,
    judge_predictions,
    load_dataset,
    percent,
    render_percent,
    verdict,
)
from guirl.evalpipe.judges import (
    ActionTolerances,
    judge_multi_action,
    judge_point_in_box,
    judge_sample,
    normalize_text,
    point_in_polygon,
)
from guirl.evalpipe.parsing import from_pixels, parse_output, round_half_up, scale_point, to_pixels
from guirl.evalpipe.types import DatasetError, DegeneratePolygon

PIX = ModelProfile("m")
NORM = ModelProfile("n", coordinate_convention="normalized_0_1000")
ACT = ModelProfile("a", parser_id="action_json", prompt_template_id="mobile_action")


# -- parsing -------------------------------------------------------------------------

def test_first_point_parser():
    assert parse_output("click at (120, 45) then (3, 4)", PIX, (200, 100)) == Point(120, 45)


def test_normalized_conversion_rounds_half_up():
    assert parse_output("(500, 250)", NORM, (1001, 100)) == Point(501, 25)
    assert to_pixels(1, 1, "normalized_0_1000", (500, 500)) == (1, 1)


def test_point_outside_image_is_parse_failure():
    assert isinstance(parse_output("(300, 20)", PIX, (200, 100)), ParseFailure)


def test_refusal_wins_over_coordinates():
    assert parse_output("REFUSE (10, 10)", PIX, (200, 100)) == Refusal()


def test_bbox_center_parser():
    prof = ModelProfile("b", parser_id="bbox_center")
    assert parse_output("[10, 20, 30, 41]", prof, (100, 100)) == Point(20, 31)


def test_garbage():
    assert isinstance(parse_output("no idea", PIX, (10, 10)), ParseFailure)


def test_action_json_parser():
    raw = 'answer: {"type": "Click", "point": [500, 500]}'
    rec = parse_output(raw, ModelProfile("a", parser_id="action_json", coordinate_convention="normalized_0_1000"),
                       (1080, 2400))
    assert rec == ActionRecord("click", (540, 1200))


@given(st.integers(1, 4000), st.integers(1, 4000), st.integers(0, 1000), st.integers(0, 1000))
def test_normalized_round_trip_within_a_pixel(W, H, nx, ny):
    x, y = to_pixels(nx, ny, "normalized_0_1000", (W, H))
    bx, by = from_pixels(x, y, "normalized_0_1000", (W, H))
    x2, y2 = to_pixels(bx, by, "normalized_0_1000", (W, H))
    assert abs(x2 - x) <= 1 and abs(y2 - y) <= 1


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_round_half_up(v):
    assert round_half_up(v) == math.floor(Fraction(v) + Fraction(1, 2))


def test_scale_point_back_to_original():
    assert scale_point(Point(50, 25), (100, 50), (200, 100)) == Point(100, 50)


# -- judges --------------------------------------------------------------------------

@given(st.integers(-5, 45), st.integers(-5, 45))
def test_box_rule_restated(x, y):
    assert judge_point_in_box((x, y), BBox(0, 10, 40, 30)) == (0 <= x <= 40 and 10 <= y <= 30)


def test_concave_polygon_notch():
    u = [(0, 0), (30, 0), (30, 30), (20, 30), (20, 10), (10, 10), (10, 30), (0, 30)]
    assert point_in_polygon((5, 20), u)
    assert not point_in_polygon((15, 20), u)
    assert point_in_polygon((15, 10), u)
    assert point_in_polygon((20, 20), u)


def test_degenerate_polygon_rejected():
    with pytest.raises(DegeneratePolygon):
        Polygon(((0, 0), (1, 1)))


def _sample(gt, dims=(100, 100), sid="s"):
    return BenchmarkSample(sid, "x.png", dims, "do it", gt, {"platform": "mobile"})


@pytest.mark.parametrize("parsed,gt,reason", [
    (Refusal(), Refusal(), "refusal_match"),
    (Point(1, 1), Refusal(), "refusal_mismatch"),
    (Refusal(), BBox(0, 0, 10, 10), "refusal_mismatch"),
    (ParseFailure("x"), BBox(0, 0, 10, 10), "parse_failure"),
    (Point(10, 10), BBox(0, 0, 10, 10), "hit"),
    (Point(11, 10), BBox(0, 0, 10, 10), "miss"),
    (ActionRecord("tap", (5, 5)), BBox(0, 0, 10, 10), "hit"),
])
def test_judge_sample_reasons(parsed, gt, reason):
    r = judge_sample(Prediction("s", "raw", parsed), _sample(gt))
    assert r.reason == reason
    assert r.correct == (reason in ("hit", "refusal_match"))


def test_parse_failure_never_correct():
    with pytest.raises(ValueError):
        JudgeResult("s", True, "parse_failure")


def test_multi_action_rules():
    tol = ActionTolerances((1000, 1000))
    assert judge_multi_action(ActionRecord("click", (100, 100)), ActionRecord("tap", (150, 150)), tol)
    assert not judge_multi_action(ActionRecord("click", (100, 100)), ActionRecord("click", (400, 400)), tol)
    assert not judge_multi_action(ActionRecord("long_press", (100, 100)), ActionRecord("click", (100, 100)), tol)
    assert judge_multi_action(ActionRecord("type", text="Hello  World"), ActionRecord("input_text", text="hello world"),
                              tol)
    assert judge_multi_action(ActionRecord("scroll", start=(0, 500), end=(0, 100)),
                              ActionRecord("scroll", direction="up"), tol)
    assert judge_multi_action(ActionRecord("back"), ActionRecord("navigate_back"), tol)


def test_unknown_action_type_judged_wrong(caplog):
    tol = ActionTolerances((100, 100))
    assert not judge_multi_action(ActionRecord("teleport"), ActionRecord("back"), tol)
    assert "unknown action type" in caplog.text


def test_normalize_text():
    assert normalize_text("  A\tb  C ") == "a b c"


def test_missing_prediction_is_parse_failure():
    ds = Dataset("d", (_sample(BBox(0, 0, 5, 5), sid="a"), _sample(BBox(0, 0, 5, 5), sid="b")))
    out = judge_predictions([Prediction("a", "", Point(1, 1))], ds)
    assert [r.reason for r in out] == ["hit", "parse_failure"]


# -- metrics and verdicts -------------------------------------------------------------

def test_percent_half_up():
    assert percent(46, 48) == Decimal("95.83")
    assert render_percent(46, 48) == "95.8%"
    assert percent(1, 8, 2) == Decimal("12.50")
    assert percent(1, 16, 1) == Decimal("6.3")


@given(st.decimals(0, 100, places=2), st.decimals(0, 100, places=2))
def test_verdict_rule_restated(o, r):
    want = "pass" if (r >= o or abs(r - o) <= 2) else "fail"
    assert verdict(o, r) == want


def test_verdict_boundary_and_missing():
    assert verdict("50.00", "48.00") == "pass"
    assert verdict("50.00", "47.99") == "fail"
    assert verdict(None, "10") == "no_baseline"


def test_metrics_breakdowns():
    samples = tuple(
        BenchmarkSample(f"s{i}", "x.png", (10, 10), "i", BBox(0, 0, 5, 5),
                        {"platform": "web" if i % 2 else "mobile", "element_type": "icon"})
        for i in range(4))
    ds = Dataset("bench", samples)
    results = [JudgeResult(f"s{i}", i < 3, "hit" if i < 3 else "miss") for i in range(4)]
    rep = compute_metrics(results, ds, "m")
    assert rep.accuracy == Decimal("75.00")
    assert rep.breakdowns["platform"]["mobile"].correct == 2
    assert rep.breakdowns["platform"]["web"].total == 2
    assert rep.reasons == {"hit": 3, "miss": 1}
    assert "task_category" not in rep.breakdowns
    with pytest.raises(MissingJudgeResult):
        compute_metrics(results[:3], ds)


# -- dataset loading -------------------------------------------------------------------

def test_dataset_validation(tmp_path):
    good = _sample(BBox(0, 0, 5, 5)).to_dict()
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(good) + "\n" + json.dumps(good) + "\n")
    with pytest.raises(DatasetError, match="duplicate"):
        load_dataset(p)
    bad = dict(good, ground_truth={"polygon": [[0, 0], [1, 1]]})
    p.write_text(json.dumps(bad) + "\n")
    with pytest.raises(DegeneratePolygon):
        load_dataset(p)
    out = dict(good, ground_truth={"bbox": [0, 0, 500, 5]})
    p.write_text(json.dumps(out) + "\n")
    with pytest.raises(DatasetError, match="outside"):
        load_dataset(p)
