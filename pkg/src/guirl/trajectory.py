"""Rollout records shared by the trainer, the credit estimators and the run logs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .simdevice.types import Action, action_from_dict, action_to_dict

TERMINATIONS = ("done", "step_budget", "rotated_restart", "aborted")


@dataclass(frozen=True)
class StepRecord:
    anchor: str
    action: Action
    logprob: float
    reward: float = 0.0
    candidate_count: int = 1
    step_score: float = 0.0

    def __post_init__(self):
        if self.logprob > 0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor": self.anchor,
            "action": action_to_dict(self.action),
            "logprob": self.logprob,
            "reward": self.reward,
            "candidate_count": self.candidate_count,
            "step_score": self.step_score,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StepRecord":
        return cls(d["anchor"], action_from_dict(d["action"]), float(d["logprob"]), float(d.get("reward", 0.0)),
                   int(d.get("candidate_count", 1)), float(d.get("step_score", 0.0)))


@dataclass
class Trajectory:
    task_id: str
    rollout_id: int
    steps: list[StepRecord] = field(default_factory=list)
    outcome: int = 0
    termination: str = "done"
    # Per-step policy inputs (candidate features, templates, chosen index); not serialized.
    decisions: list = field(default_factory=list, repr=False, compare=False)
    states: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "rollout_id": self.rollout_id,
            "outcome": self.outcome,
            "termination": self.termination,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Trajectory":
        return cls(d["task_id"], int(d["rollout_id"]), [StepRecord.from_dict(s) for s in d["steps"]],
                   int(d["outcome"]), d.get("termination", "done"))


@dataclass
class RolloutGroup:
    task_id: str
    trajectories: list[Trajectory]

    def __post_init__(self):
        for t in self.trajectories:
            if t.task_id != self.task_id:
                raise ValueError(f"trajectory for {t.task_id!r} in group for {self.task_id!r}")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


def digest(obj: Any) -> str:
    """Short stable digest of a JSON-serializable object (floats via repr)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
