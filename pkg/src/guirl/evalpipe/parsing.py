"""Raw model text to a parsed prediction, in original-image pixel coordinates."""

from __future__ import annotations

import json
import math
import re
from typing import Any

from .types import ActionRecord, BBox, ModelProfile, Parsed, ParseFailure, Point, Refusal

_NUM = r"-?\d+(?:\.\d+)?"
_PAIR_RE = re.compile(rf"({_NUM})\s*,\s*({_NUM})")
_QUAD_RE = re.compile(rf"({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})")
_JSON_RE = re.compile(r"\{.*\}", re.S)


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def to_pixels(x: float, y: float, convention: str, dims: tuple[int, int]) -> tuple[int, int]:
    W, H = dims
    if convention == "normalized_0_1000":
        return round_half_up(x * W / 1000), round_half_up(y * H / 1000)
    return round_half_up(x), round_half_up(y)


def from_pixels(x: float, y: float, convention: str, dims: tuple[int, int]) -> tuple[int, int]:
    """Inverse of to_pixels up to rounding; used by mock endpoints to answer in a model's convention."""
    W, H = dims
    if convention == "normalized_0_1000":
        return round_half_up(x * 1000 / W), round_half_up(y * 1000 / H)
    return round_half_up(x), round_half_up(y)


def _in_image(p: tuple[int, int], dims: tuple[int, int]) -> bool:
    return 0 <= p[0] <= dims[0] and 0 <= p[1] <= dims[1]


def is_refusal(raw: str, token: str) -> bool:
    return token.lower() in (raw or "").lower()


def parse_output(raw: str, profile: ModelProfile, image_dims: tuple[int, int]) -> Parsed:
    """``image_dims`` are the dimensions of the image the model saw; points outside it are parse failures."""
    raw = raw or ""
    if is_refusal(raw, profile.refusal_token):
        return Refusal()
    if profile.parser_id == "action_json":
        return _parse_action(raw, profile, image_dims)
    if profile.parser_id == "bbox_center":
        m = _QUAD_RE.search(raw)
        if m is None:
            return ParseFailure("no coordinate quadruple")
        x1, y1, x2, y2 = (float(g) for g in m.groups())
        cx, cy = (x1 + x2) / 2, (y1 + y2) / 2
    else:
        m = _PAIR_RE.search(raw)
        if m is None:
            return ParseFailure("no coordinate pair")
        cx, cy = float(m.group(1)), float(m.group(2))
    p = to_pixels(cx, cy, profile.coordinate_convention, image_dims)
    if not _in_image(p, image_dims):
        return ParseFailure(f"point {p} outside image {image_dims}")
    return Point(*p)


def _parse_action(raw: str, profile: ModelProfile, dims: tuple[int, int]) -> Parsed:
    m = _JSON_RE.search(raw)
    if m is None:
        return ParseFailure("no JSON object")
    try:
        d: dict[str, Any] = json.loads(m.group(0))
        rec = ActionRecord.from_dict(d)
    except (ValueError, KeyError, TypeError) as exc:
        return ParseFailure(f"bad action record: {exc}")

    def conv(p):
        if p is None:
            return None
        q = to_pixels(float(p[0]), float(p[1]), profile.coordinate_convention, dims)
        return q if _in_image(q, dims) else False

    point, start, end = conv(rec.point), conv(rec.start), conv(rec.end)
    if False in (point, start, end):
        return ParseFailure("action coordinates outside image")
    bbox = rec.bbox
    if bbox is not None:
        a = to_pixels(bbox.x1, bbox.y1, profile.coordinate_convention, dims)
        b = to_pixels(bbox.x2, bbox.y2, profile.coordinate_convention, dims)
        bbox = BBox(*a, *b)
    return ActionRecord(rec.type.lower(), point, bbox, rec.text, rec.direction, start, end)


def scale_point(p: Parsed, sent_dims: tuple[int, int], orig_dims: tuple[int, int]) -> Parsed:
    """Map a point parsed against a downscaled image back onto the original image."""
    if sent_dims == orig_dims:
        return p
    sx, sy = orig_dims[0] / sent_dims[0], orig_dims[1] / sent_dims[1]

    def s(q):
        return None if q is None else (min(orig_dims[0], round_half_up(q[0] * sx)),
                                       min(orig_dims[1], round_half_up(q[1] * sy)))

    if isinstance(p, Point):
        x, y = s((p.x, p.y))
        return Point(x, y)
    if isinstance(p, ActionRecord):
        bbox = None
        if p.bbox is not None:
            a, b = s((p.bbox.x1, p.bbox.y1)), s((p.bbox.x2, p.bbox.y2))
            bbox = BBox(*a, *b)
        return ActionRecord(p.type, s(p.point), bbox, p.text, p.direction, s(p.start), s(p.end))
    return p
