"""Prompt templates referenced by ModelProfile.prompt_template_id, and request assembly."""

from __future__ import annotations

from typing import Any

from ..clawctl.endpoint import image_message
from .types import ModelProfile

TEMPLATES = {
    "ground_point": ("Locate the screen element described by the instruction and answer with its "
                     "pixel coordinate as (x, y). If nothing matches, answer {refusal}.\n"
                     "Instruction: {instruction}"),
    "ground_point_norm": ("Locate the screen element described by the instruction and answer with its "
                          "coordinate as (x, y) on a 0-1000 scale for both axes. If nothing matches, "
                          "answer {refusal}.\nInstruction: {instruction}"),
    "ground_bbox": ("Give the bounding box [x1, y1, x2, y2] of the screen element described by the "
                    "instruction. If nothing matches, answer {refusal}.\nInstruction: {instruction}"),
    "mobile_action": ("You operate a phone. Reply with one JSON action record, for example "
                      '{{"type": "click", "point": [x, y]}}, {{"type": "type", "text": "..."}}, '
                      '{{"type": "scroll", "direction": "down"}}, {{"type": "back"}}.\n'
                      "Instruction: {instruction}"),
}

# First line of a zoom stage-1 request; the rest is the profile's own template.
COARSE_MARK = "Coarse pass: an approximate location is enough."


def render_prompt(profile: ModelProfile, instruction: str, coarse: bool = False) -> str:
    try:
        template = TEMPLATES[profile.prompt_template_id]
    except KeyError:
        raise ValueError(f"unknown prompt template {profile.prompt_template_id!r}") from None
    text = template.format(instruction=instruction, refusal=profile.refusal_token)
    return f"{COARSE_MARK}\n{text}" if coarse else text


def build_messages(profile: ModelProfile, instruction: str, image_b64: str, coarse: bool = False) -> list[dict[str, Any]]:
    return [image_message(render_prompt(profile, instruction, coarse), image_b64)]


def instruction_of(text: str) -> str:
    """Recover the instruction line from a rendered prompt (used by mock endpoints)."""
    for line in text.splitlines():
        if line.startswith("Instruction: "):
            return line[len("Instruction: "):]
    return ""
