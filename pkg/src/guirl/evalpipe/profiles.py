"""Pinned per-model profiles shipped as data; a run freezes the profile it used into its run directory."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .types import ModelProfile


@lru_cache(maxsize=None)
def _shipped() -> dict[str, ModelProfile]:
    doc = json.loads(resources.files("guirl").joinpath("data/profiles.json").read_text())
    return {p["model_id"]: ModelProfile.from_dict(p) for p in doc["profiles"]}


def load_profiles(path: str | Path | None = None) -> dict[str, ModelProfile]:
    if path is None:
        return dict(_shipped())
    doc = json.loads(Path(path).read_text())
    return {p["model_id"]: ModelProfile.from_dict(p) for p in doc["profiles"]}


def profile_for(model_id: str, path: str | Path | None = None) -> ModelProfile:
    profiles = load_profiles(path)
    try:
        return profiles[model_id]
    except KeyError:
        raise KeyError(f"no pinned profile for {model_id!r}; known: {sorted(profiles)}") from None
