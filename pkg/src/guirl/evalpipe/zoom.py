"""Crop-then-ground: a coarse point on the full image picks a tile, the tile is grounded again,
and the local answer is mapped back to full-image pixels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from PIL import Image

from .imaging import cap_pixels, encode_png
from .parsing import parse_output, round_half_up, scale_point
from .prompts import build_messages
from .types import ModelProfile, Parsed, ParseFailure, Point, Prediction, Refusal


@dataclass(frozen=True)
class Crop:
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def origin(self) -> tuple[int, int]:
        return (self.x1, self.y1)

    @property
    def size(self) -> tuple[int, int]:
        return (self.x2 - self.x1, self.y2 - self.y1)

    def as_list(self) -> list[int]:
        return [self.x1, self.y1, self.x2, self.y2]


def _axis(center: int, extent: int, limit: int) -> int:
    lo = center - extent // 2
    return min(max(lo, 0), limit - extent)


def zoom_ground(image_dims: tuple[int, int], coarse_point: tuple[float, float], tile_fraction: float) -> Crop:
    """The f*W x f*H tile centred on the coarse point, shifted the least amount needed to fit the image."""
    if not 0 < tile_fraction <= 1:
        raise ValueError(f"tile_fraction must be in (0, 1], got {tile_fraction}")
    W, H = image_dims
    cx, cy = round_half_up(coarse_point[0]), round_half_up(coarse_point[1])
    if not (0 <= cx <= W and 0 <= cy <= H):
        raise ValueError(f"coarse point {coarse_point} outside image {image_dims}")
    w = min(W, max(1, round_half_up(tile_fraction * W)))
    h = min(H, max(1, round_half_up(tile_fraction * H)))
    x1, y1 = _axis(cx, w, W), _axis(cy, h, H)
    return Crop(x1, y1, x1 + w, y1 + h)


def remap(crop: Crop, local: tuple[float, float]) -> tuple[int, int]:
    w, h = crop.size
    lx = min(max(local[0], 0), w)
    ly = min(max(local[1], 0), h)
    return (crop.x1 + lx, crop.y1 + ly)


def inverse_remap(crop: Crop, point: tuple[float, float]) -> tuple[float, float]:
    return (point[0] - crop.x1, point[1] - crop.y1)


def ground_once(image: Image.Image, instruction: str, profile: ModelProfile, client,
                coarse: bool = False) -> tuple[str, Parsed, tuple[int, int]]:
    """One endpoint call on ``image`` (capped to the profile's pixel budget); parsed in ``image`` pixels."""
    sent = cap_pixels(image, profile.max_pixels)
    raw = client.chat(build_messages(profile, instruction, encode_png(sent), coarse), temperature=profile.temperature)
    parsed = scale_point(parse_output(raw, profile, sent.size), sent.size, image.size)
    return raw, parsed, sent.size


def zoom_pipeline(sample_id: str, image: Image.Image, instruction: str, profile: ModelProfile, client) -> Prediction:
    if not profile.zoom_enabled:
        raise ValueError(f"profile {profile.model_id!r} has zoom disabled")
    f = profile.zoom.tile_fraction
    trace: list[dict[str, Any]] = []
    if f < 1:
        raw1, coarse, sent = ground_once(image, instruction, profile, client, coarse=True)
        trace.append({"stage": 1, "raw": raw1, "sent_dims": list(sent)})
        if isinstance(coarse, Refusal):
            return Prediction(sample_id, raw1, coarse, tuple(trace))
        if not isinstance(coarse, Point):
            raw, parsed, sent = ground_once(image, instruction, profile, client)
            trace.append({"stage": "fallback", "raw": raw, "sent_dims": list(sent)})
            return Prediction(sample_id, raw, parsed, tuple(trace))
        crop = zoom_ground(image.size, (coarse.x, coarse.y), f)
    else:
        crop = Crop(0, 0, *image.size)
    tile = image if crop.size == image.size else image.crop(tuple(crop.as_list()))
    raw2, local, sent = ground_once(tile, instruction, profile, client)
    trace.append({"stage": 2, "raw": raw2, "crop": crop.as_list(), "sent_dims": list(sent)})
    if isinstance(local, Point):
        parsed: Parsed = Point(*remap(crop, (local.x, local.y)))
    elif isinstance(local, (Refusal, ParseFailure)):
        parsed = local
    else:
        parsed = ParseFailure("zoom stage 2 expects a point")
    return Prediction(sample_id, raw2, parsed, tuple(trace) if f < 1 else ())
