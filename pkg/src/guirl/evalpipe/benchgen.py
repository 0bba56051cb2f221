"""Synthetic grounding benchmarks with known ground truth.

Targets are painted pure red on a light background with grey distractors, so a mock endpoint can
"see" them. Kinds: ``point`` (bbox ground truth), ``polygon`` (concave polygons plus refusal samples),
``action`` (mobile action records; click targets are painted, other actions are text-only).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .types import ActionRecord, BBox, BenchmarkSample, Polygon, Refusal, write_jsonl

KINDS = ("point", "polygon", "action")
TARGET_RGB = (255, 0, 0)
BACKGROUND_RGB = (236, 238, 241)
PLATFORMS = ("mobile", "desktop", "web")
ELEMENTS = ("text", "icon")
WORDS = ("hello", "weekly report", "Paris", "groceries", "meeting notes", "alarm 7am")


def star_polygon(rng: np.random.Generator, center: tuple[float, float], r_min: float, r_max: float,
                 k: int) -> list[tuple[int, int]]:
    """A simple polygon (star-shaped about ``center``); concave whenever radii vary enough."""
    angles = np.sort(rng.uniform(0, 2 * math.pi, size=k))
    radii = rng.uniform(r_min, r_max, size=k)
    pts = []
    for a, r in zip(angles, radii):
        pts.append((int(round(center[0] + r * math.cos(a))), int(round(center[1] + r * math.sin(a)))))
    dedup = list(dict.fromkeys(pts))
    return dedup


def _canvas(rng: np.random.Generator, dims: tuple[int, int], n_distractors: int = 6) -> Image.Image:
    W, H = dims
    img = Image.new("RGB", dims, BACKGROUND_RGB)
    d = ImageDraw.Draw(img)
    for _ in range(n_distractors):
        w, h = int(rng.integers(W // 20, W // 6)), int(rng.integers(H // 30, H // 10))
        x, y = int(rng.integers(0, W - w)), int(rng.integers(0, H - h))
        shade = int(rng.integers(90, 200))
        d.rectangle([x, y, x + w, y + h], fill=(shade, shade, shade + 20))
    return img


def _bbox(rng: np.random.Generator, dims: tuple[int, int]) -> BBox:
    W, H = dims
    w = int(rng.integers(max(8, W // 40), max(9, W // 12)))
    h = int(rng.integers(max(8, H // 40), max(9, H // 16)))
    x, y = int(rng.integers(0, W - w)), int(rng.integers(0, H - h))
    return BBox(x, y, x + w, y + h)


def generate(kind: str, n: int, out_dir: str | Path, seed: int = 0, image_dims: tuple[int, int] = (1000, 1000),
             refusal_rate: float = 0.2, name: str | None = None) -> Path:
    """Writes ``<name>.jsonl`` and ``images/*.png`` under ``out_dir``; returns the dataset path."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    W, H = image_dims
    samples = []
    for i in range(n):
        sid = f"{kind}-{seed}-{i:05d}"
        img = _canvas(rng, image_dims)
        draw = ImageDraw.Draw(img)
        cats = {"platform": PLATFORMS[int(rng.integers(len(PLATFORMS)))],
                "element_type": ELEMENTS[int(rng.integers(len(ELEMENTS)))]}
        if kind == "point":
            gt = _bbox(rng, image_dims)
            draw.rectangle(gt.as_list(), fill=TARGET_RGB)
            cats["task_category"] = "grounding"
            instruction = f"Select the highlighted control ({sid})"
        elif kind == "polygon":
            if rng.random() < refusal_rate:
                gt = Refusal()
                cats["task_category"] = "infeasible"
                instruction = f"Select the missing control ({sid})"
            else:
                r_max = float(rng.uniform(min(W, H) / 14, min(W, H) / 7))
                c = (float(rng.uniform(r_max, W - r_max)), float(rng.uniform(r_max, H - r_max)))
                verts = star_polygon(rng, c, 0.35 * r_max, r_max, int(rng.integers(5, 10)))
                gt = Polygon(tuple(verts))
                draw.polygon(verts, fill=TARGET_RGB)
                cats["task_category"] = "region"
                instruction = f"Select the highlighted region ({sid})"
        else:
            t = ("click", "type", "scroll", "back", "long_press")[int(rng.integers(5))]
            cats["task_category"] = t
            if t in ("click", "long_press"):
                box = _bbox(rng, image_dims)
                draw.rectangle(box.as_list(), fill=TARGET_RGB)
                gt = ActionRecord(t, point=box.center, bbox=box)
                instruction = f"{'Tap' if t == 'click' else 'Long-press'} the highlighted control ({sid})"
            elif t == "type":
                text = WORDS[int(rng.integers(len(WORDS)))]
                gt = ActionRecord("type", text=text)
                instruction = f'Type "{text}" ({sid})'
            elif t == "scroll":
                direction = ("up", "down", "left", "right")[int(rng.integers(4))]
                gt = ActionRecord("scroll", direction=direction)
                instruction = f"Scroll {direction} ({sid})"
            else:
                gt = ActionRecord("back")
                instruction = f"Go back ({sid})"
        ref = f"images/{sid}.png"
        img.save(out / ref, format="PNG", compress_level=1)
        samples.append(BenchmarkSample(sid, ref, image_dims, instruction, gt, cats))
    path = out / f"{name or kind}.jsonl"
    write_jsonl(path, (s.to_dict() for s in samples))
    return path
