"""Declarative app graphs: screens with widgets, plus (screen, trigger) -> effect transitions.

One JSON file per app::

    {
      "app_id": "notes",
      "screen_dims": [1080, 2400],
      "initial_screen": "home",
      "initial_vars": {"title": ""},
      "seeded_vars": {"banner": ["a", "b"]},
      "screens": {"home": [{"id": "new", "kind": "button", "bbox": [..], "text": "New note"}]},
      "transitions": [
        {"screen": "home", "on": {"tap": "new"}, "to": "editor"},
        {"screen": "editor", "on": {"type": "title_field"}, "bind": "title", "to": "editor_filled"},
        {"screen": "editor", "on": {"back": true}, "to": "home"}
      ]
    }

Widget text may reference variables as ``{name}``; it is rendered from the current bindings.
A transition may carry ``when`` (required variable values), ``set`` (assignments),
``toggle`` (flip a variable between "on" and "off") and ``bind`` (typed text target).
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from .types import (
    SCREEN_DIMS,
    Action,
    Back,
    Done,
    InvalidAction,
    ScreenState,
    Swipe,
    Tap,
    TypeText,
    UnknownApp,
    Widget,
)

_VAR_RE = re.compile(r"\{(\w+)\}")

Bindings = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class WidgetSpec:
    widget_id: str
    kind: str
    bbox: tuple[int, int, int, int]
    text: str = ""
    enabled: bool = True

    def render(self, bindings: Mapping[str, str]) -> Widget:
        text = _VAR_RE.sub(lambda m: bindings.get(m.group(1), ""), self.text) if "{" in self.text else self.text
        return Widget(self.widget_id, self.kind, self.bbox, text, self.enabled)


@dataclass(frozen=True)
class Transition:
    screen: str
    trigger: tuple[str, ...]
    to: str | None = None
    when: Bindings = ()
    set: Bindings = ()
    toggle: str | None = None
    bind: str | None = None

    def applies(self, bindings: Mapping[str, str]) -> bool:
        return all(bindings.get(k) == v for k, v in self.when)


def _trigger_from(on: Mapping[str, Any]) -> tuple[str, ...]:
    if "tap" in on:
        return ("tap", str(on["tap"]))
    if "type" in on:
        return ("type", str(on["type"]))
    if "swipe" in on:
        return ("swipe", str(on["swipe"]))
    if on.get("back"):
        return ("back",)
    raise ValueError(f"unrecognised transition trigger {dict(on)!r}")


class AppGraph:
    def __init__(self, doc: Mapping[str, Any]):
        self.app_id: str = doc["app_id"]
        self.screen_dims: tuple[int, int] = tuple(doc.get("screen_dims", SCREEN_DIMS))
        self.initial_screen: str = doc["initial_screen"]
        self.initial_vars: dict[str, str] = {k: str(v) for k, v in doc.get("initial_vars", {}).items()}
        self.seeded_vars: dict[str, list[str]] = {k: [str(x) for x in v] for k, v in doc.get("seeded_vars", {}).items()}
        self.screens: dict[str, tuple[WidgetSpec, ...]] = {}
        for sid, widgets in doc["screens"].items():
            self.screens[sid] = tuple(
                WidgetSpec(w["id"], w["kind"], tuple(w["bbox"]), w.get("text", ""), w.get("enabled", True))
                for w in widgets
            )
        self.transitions: dict[tuple[str, tuple[str, ...]], list[Transition]] = {}
        for t in doc.get("transitions", []):
            tr = Transition(
                screen=t["screen"],
                trigger=_trigger_from(t["on"]),
                to=t.get("to"),
                when=tuple(sorted((k, str(v)) for k, v in t.get("when", {}).items())),
                set=tuple(sorted((k, str(v)) for k, v in t.get("set", {}).items())),
                toggle=t.get("toggle"),
                bind=t.get("bind"),
            )
            self.transitions.setdefault((tr.screen, tr.trigger), []).append(tr)
        self._doc = dict(doc)
        self._render_cache: dict[tuple[str, Bindings], ScreenState] = {}
        self._validate()

    def _validate(self) -> None:
        if self.initial_screen not in self.screens:
            raise ValueError(f"{self.app_id}: initial screen {self.initial_screen!r} undefined")
        for (screen, trigger), trs in self.transitions.items():
            if screen not in self.screens:
                raise ValueError(f"{self.app_id}: transition from undefined screen {screen!r}")
            ids = {w.widget_id for w in self.screens[screen]}
            if trigger[0] in ("tap", "type") and trigger[1] not in ids:
                raise ValueError(f"{self.app_id}: transition on missing widget {trigger[1]!r} of {screen!r}")
            for tr in trs:
                if tr.to is not None and tr.to not in self.screens:
                    raise ValueError(f"{self.app_id}: transition to undefined screen {tr.to!r}")
        # rendering validates bboxes against screen bounds and widget id uniqueness
        for sid in self.screens:
            self.render(sid, tuple(sorted(self.initial_vars.items())))

    def to_dict(self) -> dict[str, Any]:
        return dict(self._doc)

    # -- state construction ----------------------------------------------------

    def initial_bindings(self, init_seed: int) -> Bindings:
        b = dict(self.initial_vars)
        for name, choices in sorted(self.seeded_vars.items()):
            digest = hashlib.sha256(f"{self.app_id}/{name}/{init_seed}".encode()).digest()
            b[name] = random.Random(int.from_bytes(digest[:8], "big")).choice(choices)
        return tuple(sorted(b.items()))

    def render(self, screen_id: str, bindings: Bindings) -> ScreenState:
        key = (screen_id, bindings)
        state = self._render_cache.get(key)
        if state is None:
            bmap = dict(bindings)
            widgets = tuple(w.render(bmap) for w in self.screens[screen_id])
            state = ScreenState(self.app_id, screen_id, widgets, bindings, self.screen_dims)
            self._render_cache[key] = state
        return state

    def initial_state(self, init_seed: int) -> ScreenState:
        return self.render(self.initial_screen, self.initial_bindings(init_seed))

    # -- dynamics ----------------------------------------------------------------

    def _resolve(self, state: ScreenState, action: Action) -> tuple[tuple[str, ...], str | None]:
        """Map an action to a transition trigger; raises InvalidAction for malformed input."""
        width, height = state.screen_dims
        if isinstance(action, Tap):
            if not (0 <= action.x <= width and 0 <= action.y <= height):
                raise InvalidAction(f"tap ({action.x}, {action.y}) outside the screen")
            hit = None
            for w in state.widgets:
                if w.contains(action.x, action.y):
                    hit = w
            if hit is None:
                raise InvalidAction(f"tap ({action.x}, {action.y}) hits no widget")
            if not hit.enabled:
                raise InvalidAction(f"widget {hit.widget_id} is disabled")
            return ("tap", hit.widget_id), None
        if isinstance(action, TypeText):
            w = state.widget(action.widget_id)
            if w is None or w.kind != "text_field" or not w.enabled:
                raise InvalidAction(f"no enabled text field {action.widget_id!r}")
            return ("type", action.widget_id), action.text
        if isinstance(action, Swipe):
            for x, y in (action.start, action.end):
                if not (0 <= x <= width and 0 <= y <= height):
                    raise InvalidAction("swipe endpoint outside the screen")
            return ("swipe", action.direction), None
        if isinstance(action, Back):
            return ("back",), None
        if isinstance(action, Done):
            return ("done",), None
        raise InvalidAction(f"not an action: {action!r}")

    def transition(self, state: ScreenState, action: Action) -> tuple[ScreenState, str | None]:
        """Pure transition. Returns (next_state, invalid_reason); invalid actions self-loop."""
        try:
            trigger, typed = self._resolve(state, action)
        except InvalidAction as exc:
            return state, str(exc)
        if trigger[0] == "done":
            return state, None
        bindings = state.bindings()
        for tr in self.transitions.get((state.screen_id, trigger), ()):
            if not tr.applies(bindings):
                continue
            for k, v in tr.set:
                bindings[k] = v
            if tr.toggle is not None:
                bindings[tr.toggle] = "off" if bindings.get(tr.toggle) == "on" else "on"
            if tr.bind is not None and typed is not None:
                bindings[tr.bind] = typed
            screen = tr.to if tr.to is not None else state.screen_id
            return self.render(screen, tuple(sorted(bindings.items()))), None
        return state, None

    def swipe_directions(self, screen_id: str) -> list[str]:
        return sorted({trig[1] for (sid, trig) in self.transitions if sid == screen_id and trig[0] == "swipe"})


_SWIPE_VECTORS = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0)}


def swipe_for(direction: str, dims: tuple[int, int]) -> Swipe:
    cx, cy = dims[0] // 2, dims[1] // 2
    dx, dy = _SWIPE_VECTORS[direction]
    reach = min(dims) // 4
    return Swipe((cx, cy), (cx + dx * reach, cy + dy * reach))


class AppRegistry:
    def __init__(self, apps: Iterable[AppGraph] = ()):
        self._apps: dict[str, AppGraph] = {}
        for app in apps:
            self.register(app)
        self._oracles: dict[Any, Any] = {}

    def register(self, app: AppGraph) -> None:
        self._apps[app.app_id] = app

    def get(self, app_id: str) -> AppGraph:
        try:
            return self._apps[app_id]
        except KeyError:
            raise UnknownApp(f"app {app_id!r} is not registered") from None

    def __contains__(self, app_id: str) -> bool:
        return app_id in self._apps

    def __iter__(self):
        return iter(self._apps.values())

    def screen_keys(self) -> list[str]:
        return sorted(f"{a.app_id}:{s}" for a in self._apps.values() for s in a.screens)

    @classmethod
    def from_dir(cls, path: str | Path) -> "AppRegistry":
        files = sorted(Path(path).glob("*.json"))
        return cls(AppGraph(json.loads(f.read_text())) for f in files)


_DEFAULT: AppRegistry | None = None


def default_registry() -> AppRegistry:
    """Registry of the apps shipped in ``guirl/data/apps``."""
    global _DEFAULT
    if _DEFAULT is None:
        root = resources.files("guirl") / "data" / "apps"
        apps = [AppGraph(json.loads(p.read_text())) for p in sorted(root.iterdir(), key=lambda p: p.name)
                if p.name.endswith(".json")]
        _DEFAULT = AppRegistry(apps)
    return _DEFAULT
