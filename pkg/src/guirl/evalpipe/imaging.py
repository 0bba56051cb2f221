"""Image loading, resolution capping and the base64 encoding used in endpoint requests."""

from __future__ import annotations

import base64
import io
import math
from pathlib import Path

from PIL import Image


def load_image(path: str | Path) -> Image.Image:
    with Image.open(path) as im:
        return im.convert("RGB")


def cap_pixels(image: Image.Image, max_pixels: int) -> Image.Image:
    """Downscale (aspect preserved) so that W*H <= max_pixels; unchanged when already small enough."""
    W, H = image.size
    if W * H <= max_pixels:
        return image
    s = math.sqrt(max_pixels / (W * H))
    w, h = max(1, int(W * s)), max(1, int(H * s))
    while w * h > max_pixels:
        w, h = max(1, w - 1), max(1, h - 1)
    return image.resize((w, h), Image.BILINEAR)


def encode_png(image: Image.Image) -> str:
    buf = io.BytesIO()
    image.save(buf, format="PNG", compress_level=1)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(b64: str) -> Image.Image:
    return Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGB")
