"""Core value types for the simulated device: widgets, screen snapshots, actions, tasks."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Union

SCREEN_DIMS = (1080, 2400)

WIDGET_KINDS = ("button", "text_field", "list_item", "toggle", "label")


class SimDeviceError(Exception):
    pass


class UnknownApp(SimDeviceError):
    pass


class InvalidAction(SimDeviceError):
    """Raised internally for malformed actions; `step` turns it into a no-op."""


class EnvFaulted(SimDeviceError):
    def __init__(self, kind: str, env_id: str = ""):
        super().__init__(f"environment {env_id or '?'} faulted: {kind}")
        self.kind = kind
        self.env_id = env_id


class EpisodeTerminated(SimDeviceError):
    pass


@dataclass(frozen=True)
class Widget:
    widget_id: str
    kind: str
    bbox: tuple[int, int, int, int]
    text: str = ""
    enabled: bool = True

    def __post_init__(self):
        if self.kind not in WIDGET_KINDS:
            raise ValueError(f"unknown widget kind {self.kind!r}")
        x1, y1, x2, y2 = self.bbox
        if x1 > x2 or y1 > y2:
            raise ValueError(f"malformed bbox {self.bbox} for {self.widget_id}")

    @property
    def center(self) -> tuple[int, int]:
        x1, y1, x2, y2 = self.bbox
        return ((x1 + x2) // 2, (y1 + y2) // 2)

    def contains(self, x: int, y: int) -> bool:
        x1, y1, x2, y2 = self.bbox
        return x1 <= x <= x2 and y1 <= y <= y2


@dataclass(frozen=True)
class ScreenState:
    """Immutable snapshot of one device screen.

    ``var_bindings`` is kept as a key-sorted tuple of pairs so the state is
    hashable; use :meth:`bindings` for a dict view.
    """

    app_id: str
    screen_id: str
    widgets: tuple[Widget, ...]
    var_bindings: tuple[tuple[str, str], ...] = ()
    screen_dims: tuple[int, int] = SCREEN_DIMS

    def __post_init__(self):
        ids = [w.widget_id for w in self.widgets]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate widget ids on screen {self.screen_id}")
        width, height = self.screen_dims
        for w in self.widgets:
            x1, y1, x2, y2 = w.bbox
            if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
                raise ValueError(f"widget {w.widget_id} outside screen bounds")
        object.__setattr__(self, "var_bindings", tuple(sorted(self.var_bindings)))

    @classmethod
    def build(cls, app_id: str, screen_id: str, widgets, var_bindings: Mapping[str, str] | None = None,
              screen_dims=SCREEN_DIMS) -> "ScreenState":
        return cls(app_id, screen_id, tuple(widgets), tuple((var_bindings or {}).items()), tuple(screen_dims))

    def bindings(self) -> dict[str, str]:
        return dict(self.var_bindings)

    def widget(self, widget_id: str) -> Widget | None:
        for w in self.widgets:
            if w.widget_id == widget_id:
                return w
        return None

    @cached_property
    def canonical(self) -> str:
        return canonical_serialize(self)

    @cached_property
    def anchor(self) -> str:
        return hashlib.blake2b(self.canonical.encode(), digest_size=16).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {
            "app_id": self.app_id,
            "screen_id": self.screen_id,
            "screen_dims": list(self.screen_dims),
            "widgets": [
                {"widget_id": w.widget_id, "kind": w.kind, "bbox": list(w.bbox), "text": w.text, "enabled": w.enabled}
                for w in self.widgets
            ],
            "var_bindings": dict(self.var_bindings),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScreenState":
        widgets = [
            Widget(w["widget_id"], w["kind"], tuple(w["bbox"]), w.get("text", ""), w.get("enabled", True))
            for w in d["widgets"]
        ]
        return cls.build(d["app_id"], d["screen_id"], widgets, d.get("var_bindings", {}),
                         tuple(d.get("screen_dims", SCREEN_DIMS)))


Observation = ScreenState


def canonical_serialize(state: ScreenState) -> str:
    widgets = sorted(state.widgets, key=lambda w: w.widget_id)
    doc = {
        "app": state.app_id,
        "screen": state.screen_id,
        "dims": list(state.screen_dims),
        "widgets": [[w.widget_id, w.kind, list(w.bbox), w.text, w.enabled] for w in widgets],
        "vars": sorted([k, v] for k, v in state.var_bindings),
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def anchor_hash(obs: ScreenState) -> str:
    """128-bit hex digest of the canonical serialization."""
    return obs.anchor


# -- actions -----------------------------------------------------------------

@dataclass(frozen=True)
class Tap:
    x: int
    y: int


@dataclass(frozen=True)
class Swipe:
    start: tuple[int, int]
    end: tuple[int, int]

    @property
    def direction(self) -> str:
        dx = self.end[0] - self.start[0]
        dy = self.end[1] - self.start[1]
        if abs(dx) >= abs(dy):
            return "right" if dx > 0 else "left"
        return "down" if dy > 0 else "up"


@dataclass(frozen=True)
class TypeText:
    widget_id: str
    text: str


@dataclass(frozen=True)
class Back:
    pass


@dataclass(frozen=True)
class Done:
    answer: str | None = None


Action = Union[Tap, Swipe, TypeText, Back, Done]

# Out-of-bounds tap: always an invalid action, so the device treats it as a no-op.
NOOP = Tap(-1, -1)

ACTION_TEMPLATES = ("tap", "swipe", "type_text", "back", "done")


def action_template(action: Action) -> str:
    if isinstance(action, Tap):
        return "tap"
    if isinstance(action, Swipe):
        return "swipe"
    if isinstance(action, TypeText):
        return "type_text"
    if isinstance(action, Back):
        return "back"
    if isinstance(action, Done):
        return "done"
    raise TypeError(f"not an action: {action!r}")


def action_to_dict(action: Action) -> dict[str, Any]:
    if isinstance(action, Tap):
        return {"type": "tap", "x": action.x, "y": action.y}
    if isinstance(action, Swipe):
        return {"type": "swipe", "from": list(action.start), "to": list(action.end)}
    if isinstance(action, TypeText):
        return {"type": "type_text", "widget_id": action.widget_id, "text": action.text}
    if isinstance(action, Back):
        return {"type": "back"}
    if isinstance(action, Done):
        return {"type": "done", "answer": action.answer}
    raise TypeError(f"not an action: {action!r}")


def action_from_dict(d: Mapping[str, Any]) -> Action:
    kind = d.get("type")
    if kind == "tap":
        return Tap(int(d["x"]), int(d["y"]))
    if kind == "swipe":
        return Swipe(tuple(d["from"]), tuple(d["to"]))
    if kind == "type_text":
        return TypeText(str(d["widget_id"]), str(d["text"]))
    if kind == "back":
        return Back()
    if kind == "done":
        return Done(d.get("answer"))
    raise ValueError(f"unknown action type {kind!r}")


# -- tasks -------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_QUOTED_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def instruction_tokens(instruction: str) -> list[str]:
    """Unique lowercase tokens of an instruction, in first-occurrence order."""
    return list(dict.fromkeys(tokenize(instruction)))


def quoted_tokens(instruction: str) -> frozenset[str]:
    out: set[str] = set()
    for m in _QUOTED_RE.finditer(instruction):
        out.update(tokenize(m.group(1) or m.group(2) or ""))
    return frozenset(out)


@dataclass(frozen=True)
class GoalPredicate:
    """Conjunction of an optional screen match and exact variable values."""

    screen: str | None = None
    vars: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.screen is None and not self.vars:
            raise ValueError("goal predicate must constrain the screen or at least one variable")
        object.__setattr__(self, "vars", tuple(sorted(self.vars)))

    def holds(self, state: ScreenState) -> bool:
        if self.screen is not None and state.screen_id != self.screen:
            return False
        if self.vars:
            b = dict(state.var_bindings)
            return all(b.get(k) == v for k, v in self.vars)
        return True

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {}
        if self.screen is not None:
            d["screen"] = self.screen
        if self.vars:
            d["vars"] = dict(self.vars)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GoalPredicate":
        return cls(d.get("screen"), tuple(d.get("vars", {}).items()))


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    instruction: str
    app_id: str
    goal: GoalPredicate
    init_seed: int = 0
    max_steps: int = 50
    difficulty: int | None = None
    reference_solution: tuple[Action, ...] = field(default=(), compare=False)
    tags: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.init_seed < 0:
            raise ValueError("init_seed must be unsigned")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "task_id": self.task_id,
            "instruction": self.instruction,
            "app_id": self.app_id,
            "init_seed": self.init_seed,
            "goal": self.goal.to_dict(),
            "max_steps": self.max_steps,
        }
        if self.difficulty is not None:
            d["difficulty"] = self.difficulty
        if self.reference_solution:
            d["reference_solution"] = [action_to_dict(a) for a in self.reference_solution]
        if self.tags:
            d["tags"] = list(self.tags)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TaskSpec":
        return cls(
            task_id=d["task_id"],
            instruction=d["instruction"],
            app_id=d["app_id"],
            goal=GoalPredicate.from_dict(d["goal"]),
            init_seed=int(d.get("init_seed", 0)),
            max_steps=int(d.get("max_steps", 50)),
            difficulty=d.get("difficulty"),
            reference_solution=tuple(action_from_dict(a) for a in d.get("reference_solution", ())),
            tags=tuple(d.get("tags", ())),
        )


@dataclass(frozen=True)
class FaultPlan:
    stall_prob: float = 0.0
    crash_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("stall_prob", "crash_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")
