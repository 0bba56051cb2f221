"""Rewards: binary outcome, dense per-step process scores, and their composition.

Composition places ``lambda_step * score_t`` on every step and adds the outcome on the
terminal step, so the episode total is ``outcome + lambda_step * sum(scores)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

from .simdevice import (
    UNREACHABLE,
    Action,
    AppRegistry,
    ScreenState,
    TaskSpec,
    action_to_dict,
    oracle_distance,
    verify_outcome,
)

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.1


class JudgeUnavailable(RuntimeError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RewardSignal:
    outcome: int
    step_scores: tuple[float, ...]
    lambda_step: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError("outcome must be 0 or 1")
        if self.lambda_step < 0:
            raise ValueError("lambda_step must be >= 0")
        object.__setattr__(self, "step_scores", tuple(float(s) for s in self.step_scores))
        if any(not 0.0 <= s <= 1.0 for s in self.step_scores):
            raise ValueError("step scores must lie in [0, 1]")

    def rewards(self) -> list[float]:
        return compose(self.outcome, self.step_scores, self.lambda_step)

    @property
    def total(self) -> float:
        return self.outcome + self.lambda_step * math.fsum(self.step_scores)


@dataclass(frozen=True)
class JudgeRequest:
    instruction: str
    prev_obs: Any
    cur_obs: Any
    action_history: tuple[Action, ...] = ()

    def payload(self) -> dict[str, Any]:
        def ser(o):
            return o.to_dict() if isinstance(o, ScreenState) else o

        return {
            "instruction": self.instruction,
            "prev_obs": ser(self.prev_obs),
            "cur_obs": ser(self.cur_obs),
            "action_history": [action_to_dict(a) for a in self.action_history],
        }

    def digest(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class Judge(Protocol):
    def ask(self, kind: str, payload: dict[str, Any]) -> str: ...


class MockJudge:
    """Deterministic judge: the reply is a scripted function of the request digest.

    ``script`` may be a constant reply or a callable ``(kind, digest) -> reply``.
    ``fail`` makes every call raise JudgeUnavailable.
    """

    def __init__(self, script: str | Callable[[str, str], str] = "success", fail: bool = False):
        self.script = script
        self.fail = fail
        self.calls = 0

    def ask(self, kind: str, payload: dict[str, Any]) -> str:
        self.calls += 1
        if self.fail:
            raise JudgeUnavailable("mock judge configured to fail")
        if callable(self.script):
            blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
            return self.script(kind, hashlib.sha256(blob.encode()).hexdigest())
        return self.script


_JUDGE_PROMPTS = {
    "outcome": "You are grading a phone-automation episode. Given the task instruction and the final "
               "screen, answer with exactly one word: success or failure.",
    "step": "You are grading one step of a phone-automation episode. Given the instruction, the previous "
            "screen, the current screen and the action history, reply with a number between 0 and 1 "
            "saying how much the last action advanced the task.",
}


class RemoteJudge:
    """MLLM-as-judge over a chat-completions endpoint."""

    def __init__(self, client, temperature: float = 0.0):
        self.client = client
        self.temperature = temperature

    def ask(self, kind: str, payload: dict[str, Any]) -> str:
        from .clawctl.endpoint import EndpointError, text_message

        messages = [text_message(_JUDGE_PROMPTS[kind], role="system"),
                    text_message(json.dumps(payload, sort_keys=True))]
        try:
            return self.client.chat(messages, temperature=self.temperature)
        except EndpointError as exc:
            raise JudgeUnavailable(str(exc)) from exc


_VERDICT_RE = re.compile(r"\b(success|successful|yes|pass|failure|fail|failed|no)\b", re.I)
_NUMBER_RE = re.compile(r"[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?")


def parse_verdict(reply: str) -> int:
    m = _VERDICT_RE.search(reply or "")
    if m is None:
        raise JudgeUnavailable(f"unparseable judge verdict {reply!r}")
    return int(m.group(1).lower() in ("success", "successful", "yes", "pass"))


def parse_score(reply: str) -> float:
    m = _NUMBER_RE.search(reply or "")
    if m is None:
        raise JudgeUnavailable(f"unparseable judge score {reply!r}")
    return min(1.0, max(0.0, float(m.group(0))))


def outcome_reward(final_state: ScreenState, task: TaskSpec, mode: str = "system", judge: Judge | None = None) -> int:
    if mode == "system":
        return verify_outcome(final_state, task)
    if mode == "judge":
        if judge is None:
            raise JudgeUnavailable("judge mode requested without a judge client")
        payload = {"instruction": task.instruction, "final_obs": final_state.to_dict()}
        return parse_verdict(judge.ask("outcome", payload))
    raise ValueError(f"unknown outcome mode {mode!r}")


def prm_step_score(req: JudgeRequest, task: TaskSpec, mode: str = "rule", judge: Judge | None = None,
                   registry: AppRegistry | None = None) -> float:
    if mode == "rule":
        before = oracle_distance(req.prev_obs, task, registry)
        after = oracle_distance(req.cur_obs, task, registry)
        return 1.0 if after != UNREACHABLE and after < before else 0.0
    if mode == "remote":
        if not req.action_history:
            raise ValueError("step judging needs at least one action in the history")
        try:
            if judge is None:
                raise JudgeUnavailable("remote mode requested without a judge client")
            return parse_score(judge.ask("step", req.payload()))
        except JudgeUnavailable as exc:
            log.warning("step judge unavailable, scoring 0: %s", exc)
            return 0.0
    raise ValueError(f"unknown PRM mode {mode!r}")


def compose(outcome: int, step_scores: Sequence[float], lambda_step: float = DEFAULT_LAMBDA,
            placement: str = "per_step", length: int | None = None) -> list[float]:
    """Per-step rewards r_1..r_T; only ``per_step`` placement is defined."""
    if placement != "per_step":
        raise ValueError(f"unsupported placement {placement!r}")
    if length is not None and length != len(step_scores):
        raise LengthMismatch(f"{len(step_scores)} step scores for a {length}-step trajectory")
    if not step_scores:
        raise LengthMismatch("cannot compose rewards for an empty trajectory")
    rewards = [lambda_step * s for s in step_scores]
    rewards[-1] += outcome
    return rewards
