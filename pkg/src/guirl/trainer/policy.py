"""Policies over the enumerated candidate actions of a screen.

The toy policy is linear-softmax: each candidate ``c`` gets a feature vector ``x_c``
and an action template ``tau_c``; its score is ``x_c . W[:, tau_c]`` and the policy samples
from ``softmax(score / temperature)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Protocol

import numpy as np

from ..simdevice import (
    ACTION_TEMPLATES,
    NOOP,
    WIDGET_KINDS,
    Action,
    AppRegistry,
    Back,
    Done,
    ScreenState,
    Tap,
    TaskSpec,
    TypeText,
    action_from_dict,
    action_template,
    default_registry,
    instruction_tokens,
    quoted_tokens,
    task_oracle,
    tokenize,
)

log = logging.getLogger(__name__)

FEATURE_VERSION = "feat-v1"
KINDS = WIDGET_KINDS + ("none",)
TEMPLATE_INDEX = {t: i for i, t in enumerate(ACTION_TEMPLATES)}


def enumerate_candidates(obs: ScreenState, task: TaskSpec) -> list[Action]:
    """Taps on enabled widget centres, then typed instruction tokens per text field, then back, done."""
    out: list[Action] = [Tap(*w.center) for w in obs.widgets if w.enabled]
    tokens = instruction_tokens(task.instruction)
    for w in obs.widgets:
        if w.enabled and w.kind == "text_field":
            out.extend(TypeText(w.widget_id, tok) for tok in tokens)
    out.append(Back())
    out.append(Done())
    return out


class FeatureMap:
    """bias | widget kind one-hot | word overlap with the instruction | typed token is quoted |
    no tappable widget matches the instruction | ...and a label does | screen one-hot.

    The action-template one-hot is realised by the column of W a candidate reads.
    """

    def __init__(self, screen_keys: list[str]):
        self.screen_keys = list(screen_keys)
        self._screen_index = {k: i for i, k in enumerate(self.screen_keys)}
        self.kind_offset = 1
        self.overlap_index = self.kind_offset + len(KINDS)
        self.quoted_index = self.overlap_index + 1
        self.no_match_index = self.quoted_index + 1
        self.settled_index = self.no_match_index + 1
        self.screen_offset = self.settled_index + 1
        self.dim = self.screen_offset + len(self.screen_keys)
        h = hashlib.sha256(json.dumps(self.screen_keys).encode()).hexdigest()[:12]
        self.version = f"{FEATURE_VERSION}:{h}"
        self._cached = lru_cache(maxsize=65536)(self._compute)

    @classmethod
    def for_registry(cls, registry: AppRegistry) -> "FeatureMap":
        return cls(registry.screen_keys())

    def names(self) -> list[str]:
        return (["bias"] + [f"kind={k}" for k in KINDS] + ["overlap", "quoted", "no_match", "settled"]
                + [f"screen={k}" for k in self.screen_keys])

    def __call__(self, obs: ScreenState, task: TaskSpec):
        """(candidates, X [n, dim], templates [n]) for a screen; cached and read-only."""
        return self._cached(obs, task.instruction)

    def _compute(self, obs: ScreenState, instruction: str):
        probe_task = _InstructionOnly(instruction)
        cands = enumerate_candidates(obs, probe_task)
        words = set(tokenize(instruction))
        quoted = quoted_tokens(instruction)
        screen = self._screen_index.get(f"{obs.app_id}:{obs.screen_id}")
        by_center = {}
        for w in obs.widgets:
            if w.enabled:
                by_center.setdefault(w.center, w)
        X = np.zeros((len(cands), self.dim))
        tau = np.empty(len(cands), dtype=np.intp)
        X[:, 0] = 1.0
        if screen is not None:
            X[:, self.screen_offset + screen] = 1.0
        for i, c in enumerate(cands):
            tau[i] = TEMPLATE_INDEX[action_template(c)]
            if isinstance(c, Tap):
                w = by_center[(c.x, c.y)]
                X[i, self.kind_offset + KINDS.index(w.kind)] = 1.0
                toks = set(tokenize(w.text))
                if toks:
                    X[i, self.overlap_index] = len(toks & words) / len(toks)
            elif isinstance(c, TypeText):
                X[i, self.kind_offset + KINDS.index("text_field")] = 1.0
                X[i, self.quoted_index] = float(c.text in quoted)
            else:
                X[i, self.kind_offset + KINDS.index("none")] = 1.0
        taps = tau == TEMPLATE_INDEX["tap"]
        best = X[taps, self.overlap_index].max() if taps.any() else 0.0
        X[:, self.no_match_index] = 1.0 - best
        label_hit = any(words & set(tokenize(w.text)) for w in obs.widgets if w.kind == "label")
        X[:, self.settled_index] = float(best == 0.0 and label_hit)
        X.setflags(write=False)
        tau.setflags(write=False)
        return cands, X, tau


@dataclass(frozen=True)
class _InstructionOnly:
    instruction: str


@dataclass
class PolicyParams:
    W: np.ndarray
    feature_version: str = FEATURE_VERSION

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[1] != len(ACTION_TEMPLATES):
            raise ValueError(f"W must be |features| x {len(ACTION_TEMPLATES)}, got {self.W.shape}")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("policy parameters must be finite")

    @classmethod
    def init(cls, features: FeatureMap, rng: np.random.Generator | None = None, scale: float = 0.01) -> "PolicyParams":
        shape = (features.dim, len(ACTION_TEMPLATES))
        W = np.zeros(shape) if rng is None or scale == 0 else rng.normal(0.0, scale, size=shape)
        return cls(W, features.version)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.W.copy(), self.feature_version)


def scores(W: np.ndarray, X: np.ndarray, tau: np.ndarray) -> np.ndarray:
    return np.einsum("cf,fc->c", X, W[:, tau])


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def action_probs(W: np.ndarray, X: np.ndarray, tau: np.ndarray, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    return softmax(scores(W, X, tau) / temperature)


def grad_logprob(W: np.ndarray, X: np.ndarray, tau: np.ndarray, idx: int, temperature: float) -> np.ndarray:
    """d log pi(idx) / dW = (1/T) sum_c (1[c = idx] - p_c) x_c e_{tau_c}^T."""
    p = action_probs(W, X, tau, temperature)
    coef = -p
    coef[idx] += 1.0
    g = np.zeros_like(W)
    np.add.at(g.T, tau, (coef[:, None] * X))
    return g / temperature


@dataclass
class Decision:
    action: Action
    logprob: float
    candidate_count: int
    cache: Any = None


class Policy(Protocol):
    def act(self, obs: ScreenState, task: TaskSpec, temperature: float, rng: np.random.Generator,
            greedy: bool = False) -> Decision: ...


class LinearSoftmaxPolicy:
    def __init__(self, params: PolicyParams, features: FeatureMap):
        if params.feature_version not in (features.version, FEATURE_VERSION):
            raise ValueError(f"params built for {params.feature_version}, features are {features.version}")
        if params.W.shape[0] != features.dim:
            raise ValueError("parameter rows do not match the feature dimension")
        self.params = params
        self.features = features

    def act(self, obs, task, temperature, rng, greedy=False) -> Decision:
        cands, X, tau = self.features(obs, task)
        z = scores(self.params.W, X, tau) / temperature
        logp = log_softmax(z)
        if greedy:
            idx = int(np.argmax(z))
        else:
            idx = int(rng.choice(len(cands), p=np.exp(logp)))
        return Decision(cands[idx], min(0.0, float(logp[idx])), len(cands), (X, tau, idx))


def act(params: PolicyParams, obs: ScreenState, task: TaskSpec, temperature: float, rng: np.random.Generator,
        features: FeatureMap | None = None, greedy: bool = False) -> tuple[Action, float]:
    features = features or FeatureMap.for_registry(default_registry())
    d = LinearSoftmaxPolicy(params, features).act(obs, task, temperature, rng, greedy)
    return d.action, d.logprob


class RandomPolicy:
    """Uniform over the candidate set."""

    def act(self, obs, task, temperature, rng, greedy=False) -> Decision:
        cands = enumerate_candidates(obs, task)
        idx = int(rng.integers(len(cands)))
        return Decision(cands[idx], -float(np.log(len(cands))), len(cands))


class OracleGreedyPolicy:
    """Follows the BFS shortest path; declares done at the goal."""

    def __init__(self, registry: AppRegistry | None = None):
        self.registry = registry or default_registry()

    def act(self, obs, task, temperature, rng, greedy=False) -> Decision:
        nxt = task_oracle(task, self.registry).next_action(obs)
        n = len(enumerate_candidates(obs, task))
        return Decision(nxt if nxt is not None else Done(), 0.0, n)


_JSON_RE = re.compile(r"\{.*\}", re.S)


def parse_action_reply(reply: str) -> Action:
    """First JSON object in the reply, read as an action record."""
    m = _JSON_RE.search(reply or "")
    if m is None:
        raise ValueError("no JSON object in reply")
    return action_from_dict(json.loads(m.group(0)))


class RemotePolicy:
    """Chat-completions policy: observation as text in, one JSON action out.

    Unparseable replies become the no-op action; there is no local log-probability, so 0 is recorded.
    """

    SYSTEM = ("You control a phone. Reply with one JSON action: "
              '{"type": "tap", "x": int, "y": int} | {"type": "swipe", "from": [x, y], "to": [x, y]} | '
              '{"type": "type_text", "widget_id": str, "text": str} | {"type": "back"} | {"type": "done"}')

    def __init__(self, client):
        self.client = client
        self.parse_failures = 0

    def act(self, obs, task, temperature, rng, greedy=False) -> Decision:
        from ..clawctl.endpoint import text_message

        prompt = json.dumps({"instruction": task.instruction, "screen": obs.to_dict()}, sort_keys=True)
        reply = self.client.chat([text_message(self.SYSTEM, "system"), text_message(prompt)],
                                 temperature=0.0 if greedy else temperature)
        try:
            action = parse_action_reply(reply)
        except (ValueError, KeyError, TypeError) as exc:
            self.parse_failures += 1
            log.warning("unparseable policy reply, using no-op: %s", exc)
            action = NOOP
        return Decision(action, 0.0, 1)
