from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator

from .types import TaskSpec


@dataclass(frozen=True)
class TaskSuite:
    suite_id: str
    tasks: tuple[TaskSpec, ...]

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[TaskSpec]:
        return iter(self.tasks)

    def __getitem__(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)

    def with_tag(self, tag: str) -> "TaskSuite":
        return TaskSuite(f"{self.suite_id}[{tag}]", tuple(t for t in self.tasks if tag in t.tags))

    def to_dict(self) -> dict:
        return {"suite_id": self.suite_id, "tasks": [t.to_dict() for t in self.tasks]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskSuite":
        tasks = tuple(TaskSpec.from_dict(t) for t in doc["tasks"])
        ids = [t.task_id for t in tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids in suite")
        return cls(doc.get("suite_id", "suite"), tasks)


def load_suite(name_or_path: str | Path = "core") -> TaskSuite:
    """Load a shipped suite by name, or any suite file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return TaskSuite.from_dict(json.loads(path.read_text()))
    res = resources.files("guirl") / "data" / "suites" / f"{name_or_path}.json"
    return TaskSuite.from_dict(json.loads(res.read_text()))
