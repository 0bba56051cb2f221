"""Per-sample correctness: point-in-box, polygon/refusal, and mobile multi-action judges."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .types import (
    ActionRecord,
    BBox,
    BenchmarkSample,
    Dataset,
    JudgeResult,
    ModelProfile,
    Parsed,
    ParseFailure,
    Point,
    Polygon,
    Prediction,
    Refusal,
    read_jsonl,
    write_jsonl,
)

log = logging.getLogger(__name__)

CLICK_LIKE = frozenset({"click", "tap", "long_press"})
TYPE_LIKE = frozenset({"type", "input_text", "open_app"})
DIRECTIONAL = frozenset({"scroll", "swipe"})
TYPE_ONLY = frozenset({"back", "done", "home", "wait", "navigate_back", "navigate_home"})
KNOWN_ACTIONS = CLICK_LIKE | TYPE_LIKE | DIRECTIONAL | TYPE_ONLY


class UnknownActionType(ValueError):
    pass


class JudgeInputError(ValueError):
    pass


def judge_point_in_box(point: tuple[float, float], bbox: BBox | Sequence[float]) -> bool:
    x1, y1, x2, y2 = bbox.as_list() if isinstance(bbox, BBox) else bbox
    x, y = point
    return x1 <= x <= x2 and y1 <= y <= y2


def _on_segment(p, a, b) -> bool:
    (px, py), (ax, ay), (bx, by) = p, a, b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if cross != 0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def point_in_polygon(point: tuple[float, float], vertices: Sequence[tuple[float, float]]) -> bool:
    """Even-odd ray casting in exact rational arithmetic; points on an edge count as inside."""
    p = (Fraction(point[0]), Fraction(point[1]))
    vs = [(Fraction(x), Fraction(y)) for x, y in vertices]
    n = len(vs)
    if n < 3:
        raise JudgeInputError("polygon needs >= 3 vertices")
    inside = False
    px, py = p
    for i in range(n):
        a, b = vs[i], vs[(i + 1) % n]
        if _on_segment(p, a, b):
            return True
        (ax, ay), (bx, by) = a, b
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
    return inside


def judge_polygon_refusal(parsed: Parsed, ground_truth: Polygon | Refusal) -> bool:
    if isinstance(ground_truth, Refusal):
        return isinstance(parsed, Refusal)
    if isinstance(parsed, Point):
        return point_in_polygon((parsed.x, parsed.y), ground_truth.vertices)
    return False


# -- multi-action ------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionTolerances:
    screen_dims: tuple[int, int]
    click_diag_fraction: float = 0.14


_WS_RE = re.compile(r"\s+")


def normalize_text(s: str | None) -> str:
    return _WS_RE.sub(" ", (s or "")).strip().lower()


def swipe_direction(rec: ActionRecord) -> str | None:
    if rec.direction:
        return rec.direction.lower()
    if rec.start is None or rec.end is None:
        return None
    dx, dy = rec.end[0] - rec.start[0], rec.end[1] - rec.start[1]
    if dx == 0 and dy == 0:
        return None
    if abs(dx) >= abs(dy):
        return "right" if dx > 0 else "left"
    return "down" if dy > 0 else "up"


def _kind(t: str) -> str:
    t = t.lower()
    if t in ("tap",):
        return "click"
    if t == "input_text":
        return "type"
    if t == "navigate_back":
        return "back"
    if t == "navigate_home":
        return "home"
    return t


def judge_multi_action(pred: ActionRecord, gold: ActionRecord, tolerances: ActionTolerances) -> bool:
    for rec in (pred, gold):
        if rec.type.lower() not in KNOWN_ACTIONS:
            log.warning("unknown action type %r; judged incorrect", rec.type)
            return False
    if _kind(pred.type) != _kind(gold.type):
        return False
    t = pred.type.lower()
    if t in CLICK_LIKE:
        if pred.point is None:
            return False
        if gold.bbox is not None:
            return judge_point_in_box(pred.point, gold.bbox)
        if gold.point is None:
            return False
        W, H = tolerances.screen_dims
        radius = tolerances.click_diag_fraction * math.hypot(W, H)
        return math.dist(pred.point, gold.point) <= radius
    if t in TYPE_LIKE:
        return normalize_text(pred.text) == normalize_text(gold.text)
    if t in DIRECTIONAL:
        d = swipe_direction(pred)
        return d is not None and d == swipe_direction(gold)
    return True


# -- per-sample dispatch -----------------------------------------------------------------

def judge_sample(pred: Prediction, sample: BenchmarkSample, profile: ModelProfile | None = None) -> JudgeResult:
    parsed, gt = pred.parsed, sample.ground_truth
    sid = sample.sample_id
    if pred.sample_id != sid:
        raise JudgeInputError(f"prediction {pred.sample_id!r} paired with sample {sid!r}")
    if isinstance(parsed, ParseFailure):
        return JudgeResult(sid, False, "parse_failure")
    if isinstance(gt, Refusal):
        ok = isinstance(parsed, Refusal)
        return JudgeResult(sid, ok, "refusal_match" if ok else "refusal_mismatch")
    if isinstance(parsed, Refusal):
        return JudgeResult(sid, False, "refusal_mismatch")
    if isinstance(parsed, ActionRecord) and isinstance(gt, (BBox, Polygon)):
        if parsed.type.lower() in CLICK_LIKE and parsed.point is not None:
            parsed = Point(*(int(round(v)) for v in parsed.point))
    if isinstance(gt, BBox):
        if not isinstance(parsed, Point):
            return JudgeResult(sid, False, "miss")
        ok = judge_point_in_box((parsed.x, parsed.y), gt)
    elif isinstance(gt, Polygon):
        if not isinstance(parsed, Point):
            return JudgeResult(sid, False, "miss")
        ok = judge_polygon_refusal(parsed, gt)
    else:
        if isinstance(parsed, Point):
            parsed = ActionRecord("click", (parsed.x, parsed.y))
        frac = profile.click_tolerance if profile is not None else 0.14
        ok = judge_multi_action(parsed, gt, ActionTolerances(sample.image_dims, frac))
    return JudgeResult(sid, ok, "hit" if ok else "miss")


def judge_predictions(predictions: Iterable[Prediction], dataset: Dataset,
                      profile: ModelProfile | None = None) -> list[JudgeResult]:
    """One result per sample, in dataset order. Missing predictions are judged as parse failures."""
    by_id: dict[str, Prediction] = {}
    for p in predictions:
        if p.sample_id in by_id:
            raise JudgeInputError(f"duplicate prediction for {p.sample_id!r}")
        by_id[p.sample_id] = p
    known = {s.sample_id for s in dataset}
    stray = sorted(set(by_id) - known)
    if stray:
        raise JudgeInputError(f"predictions for samples not in the dataset: {stray[:5]}")
    out = []
    for s in dataset:
        p = by_id.get(s.sample_id)
        if p is None:
            log.warning("no prediction for %s; judged as parse failure", s.sample_id)
            p = Prediction(s.sample_id, "", ParseFailure("missing prediction"))
        out.append(judge_sample(p, s, profile))
    return out


def read_predictions(paths: Iterable[str | Path]) -> list[Prediction]:
    preds: list[Prediction] = []
    for path in paths:
        preds.extend(Prediction.from_dict(r) for r in read_jsonl(path))
    return preds


def judge_files(pred_dir: str | Path, dataset: Dataset, out_path: str | Path,
                profile: ModelProfile | None = None) -> list[JudgeResult]:
    """Re-judges every shard in ``pred_dir``; output depends only on the input files."""
    shards = sorted(Path(pred_dir).glob("pred.shard-*.jsonl"), key=lambda p: int(p.name.split("-")[1].split(".")[0]))
    results = judge_predictions(read_predictions(shards), dataset, profile)
    write_jsonl(out_path, (r.to_dict() for r in results))
    return results


def read_judgements(path: str | Path) -> list[JudgeResult]:
    return [JudgeResult.from_dict(r) for r in read_jsonl(path)]
